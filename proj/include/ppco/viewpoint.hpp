#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ppco/repository.hpp"

namespace ppco {

// ---------------------------------------------------------------------------
// Users and viewpoints
// ---------------------------------------------------------------------------

struct User {
    EntityId id;
    std::string name;
    Situation situation = Situation::OtherSituation;
    // activity -> competence level, insertion-ordered. Exactly one activity
    // carries level 3.
    std::vector<std::pair<std::string, int>> competences;
    bool operator==(const User&) const = default;

    const int* competence(std::string_view activity) const {
        for (const auto& [a, l] : competences)
            if (a == activity) return &l;
        return nullptr;
    }
};

struct Viewpoint {
    std::uint64_t vp = 0;  // VP#
    EntityId user;
    std::string domain_name;  // angle of view: the activity domain's name
    std::string activity;     // current activity within the domain
    std::string focus;        // speciality targeted on the product
    EntityId product;
    int competence = 1;  // copied from the user's competence for the activity
    std::optional<std::uint64_t> relationship_ref;  // the user's level-3 viewpoint on the product
    bool operator==(const Viewpoint&) const = default;

    EntityId record_id() const { return EntityId{"vp", vp}; }
};

// One (batch, importance level) connection. Level 1 is important, 2 useful,
// 3 superficial within the domain.
struct BatchLevel {
    std::string batch;
    int level = 3;
    bool operator==(const BatchLevel&) const = default;
};

struct Connection {
    std::string batch;
    int level = 3;
    std::vector<std::uint64_t> contributors;  // VP#s that list this batch
    bool operator==(const Connection&) const = default;
};

struct FilterResult {
    EntityId user;
    EntityId product;
    std::vector<std::uint64_t> viewpoint_order;  // descending competence
    std::vector<Connection> connections;
    bool operator==(const FilterResult&) const = default;
};

// ---------------------------------------------------------------------------
// Engine configuration: families, the (activity, focus) connection table,
// and batch selectors for payload materialization.
// ---------------------------------------------------------------------------

struct Family {
    std::string name;
    std::vector<std::string> batches;
    bool operator==(const Family&) const = default;
};

struct ConnectionEntry {
    std::string activity;
    std::string focus;
    std::vector<BatchLevel> batches;
    bool operator==(const ConnectionEntry&) const = default;
};

enum class SelectorKind {
    artifact, functions, behaviors, flows, form, sub_artifacts, assembly, constraints,
    requirements, group, attributes
};

namespace detail {
inline constexpr std::array<std::string_view, 11> selector_kind_names{
    "artifact", "functions", "behaviors", "flows", "form", "sub_artifacts", "assembly",
    "constraints", "requirements", "group", "attributes"};
}

inline std::string_view to_string(SelectorKind v) {
    return detail::enum_name(detail::selector_kind_names, v);
}
inline SelectorKind selector_kind_from(std::string_view s) {
    return detail::enum_value<SelectorKind>(detail::selector_kind_names, s, "selector kind");
}

struct BatchSelector {
    SelectorKind kind = SelectorKind::artifact;
    std::string prefix;  // attribute key prefix, used by kind == attributes
    bool operator==(const BatchSelector&) const = default;
};

struct ViewpointConfig {
    std::vector<Family> families;
    std::vector<ConnectionEntry> connections;
    std::map<std::string, BatchSelector> selectors;  // batch name -> selector
    bool operator==(const ViewpointConfig&) const = default;

    const ConnectionEntry* entry(std::string_view activity, std::string_view focus) const {
        for (const auto& e : connections)
            if (e.activity == activity && e.focus == focus) return &e;
        return nullptr;
    }

    void validate() const {
        for (const auto& e : connections) {
            std::vector<std::string> names;
            for (const auto& b : e.batches) {
                if (b.level < 1 || b.level > 3)
                    throw Error(Errc::invalid_level, "batch '" + b.batch + "' level " +
                                                         std::to_string(b.level));
                if (!in_some_family(b.batch))
                    throw Error(Errc::invalid_spec,
                                "batch '" + b.batch + "' belongs to no family");
                names.push_back(b.batch);
            }
            std::sort(names.begin(), names.end());
            if (std::adjacent_find(names.begin(), names.end()) != names.end())
                throw Error(Errc::invalid_spec, "duplicate batch in connection entry (" +
                                                    e.activity + ", " + e.focus + ")");
        }
        for (const auto& f : families) {
            std::vector<std::string> names = f.batches;
            std::sort(names.begin(), names.end());
            if (std::adjacent_find(names.begin(), names.end()) != names.end())
                throw Error(Errc::invalid_spec, "duplicate batch in family '" + f.name + "'");
        }
    }

    bool in_some_family(std::string_view batch) const {
        for (const auto& f : families)
            for (const auto& b : f.batches)
                if (b == batch) return true;
        return false;
    }

    Json to_json() const {
        Json j;
        Json fams = Json::array();
        for (const auto& f : families) fams.push_back(Json{{"name", f.name}, {"batches", f.batches}});
        j["families"] = fams;
        Json conns = Json::array();
        for (const auto& e : connections) {
            Json batches = Json::array();
            for (const auto& b : e.batches) batches.push_back(Json::array({b.batch, b.level}));
            conns.push_back(Json{{"activity", e.activity}, {"focus", e.focus}, {"batches", batches}});
        }
        j["connections"] = conns;
        Json sels = Json::object();
        for (const auto& [batch, sel] : selectors) {
            Json s;
            s["kind"] = to_string(sel.kind);
            if (!sel.prefix.empty()) s["prefix"] = sel.prefix;
            sels[batch] = s;
        }
        j["selectors"] = sels;
        return j;
    }

    static ViewpointConfig from_json(const Json& j) {
        ViewpointConfig c;
        for (const auto& f : j.value("families", Json::array()))
            c.families.push_back(
                Family{f.at("name").get<std::string>(),
                       f.at("batches").get<std::vector<std::string>>()});
        for (const auto& e : j.value("connections", Json::array())) {
            ConnectionEntry entry;
            entry.activity = e.at("activity").get<std::string>();
            entry.focus = e.at("focus").get<std::string>();
            for (const auto& b : e.at("batches"))
                entry.batches.push_back(BatchLevel{b.at(0).get<std::string>(), b.at(1).get<int>()});
            c.connections.push_back(std::move(entry));
        }
        if (j.contains("selectors")) {
            for (const auto& [batch, s] : j.at("selectors").items()) {
                BatchSelector sel;
                sel.kind = selector_kind_from(s.at("kind").get<std::string>());
                sel.prefix = s.value("prefix", "");
                c.selectors[batch] = sel;
            }
        }
        c.validate();
        return c;
    }
};

// ---------------------------------------------------------------------------
// Materialized payload
// ---------------------------------------------------------------------------

struct PayloadItem {
    std::string kind;   // "artifact", "function", ..., "attribute", "user"
    std::string ref;    // entity id or attribute key
    std::string label;  // display name or attribute value
    bool operator==(const PayloadItem&) const = default;
};

struct Fragment {
    std::string batch;
    int level = 3;
    std::vector<PayloadItem> items;
    bool operator==(const Fragment&) const = default;
};

using Payload = std::vector<Fragment>;

// ---------------------------------------------------------------------------
// JSON for users / viewpoints
// ---------------------------------------------------------------------------

namespace js {

inline Json user_json(const User& u) {
    Json j;
    j["id"] = u.id.str();
    j["name"] = u.name;
    j["situation"] = to_string(u.situation);
    Json cs = Json::array();
    for (const auto& [a, l] : u.competences) cs.push_back(Json::array({a, l}));
    j["competences"] = cs;
    return j;
}

inline User user_from(const Json& j) {
    User u;
    u.id = id_from(j.at("id"), "user id");
    u.name = j.at("name").get<std::string>();
    u.situation = situation_from(j.at("situation").get<std::string>());
    for (const auto& c : j.at("competences"))
        u.competences.emplace_back(c.at(0).get<std::string>(), c.at(1).get<int>());
    return u;
}

inline Json viewpoint_json(const Viewpoint& v) {
    Json j;
    j["vp"] = v.vp;
    j["user"] = v.user.str();
    j["domain"] = v.domain_name;
    j["activity"] = v.activity;
    j["focus"] = v.focus;
    j["product"] = v.product.str();
    j["competence"] = v.competence;
    j["relationship_ref"] = v.relationship_ref ? Json(*v.relationship_ref) : Json(nullptr);
    return j;
}

inline Viewpoint viewpoint_from(const Json& j) {
    Viewpoint v;
    v.vp = j.at("vp").get<std::uint64_t>();
    v.user = id_from(j.at("user"), "viewpoint user");
    v.domain_name = j.at("domain").get<std::string>();
    v.activity = j.at("activity").get<std::string>();
    v.focus = j.at("focus").get<std::string>();
    v.product = id_from(j.at("product"), "viewpoint product");
    v.competence = j.at("competence").get<int>();
    if (!j.at("relationship_ref").is_null())
        v.relationship_ref = j.at("relationship_ref").get<std::uint64_t>();
    return v;
}

inline Json filter_result_json(const FilterResult& r) {
    Json j;
    j["user"] = r.user.str();
    j["product"] = r.product.str();
    j["viewpoint_order"] = r.viewpoint_order;
    Json cs = Json::array();
    for (const auto& c : r.connections) {
        Json e;
        e["batch"] = c.batch;
        e["level"] = c.level;
        e["contributors"] = c.contributors;
        cs.push_back(e);
    }
    j["connections"] = cs;
    return j;
}

inline FilterResult filter_result_from(const Json& j) {
    FilterResult r;
    r.user = id_from(j.at("user"), "user");
    r.product = id_from(j.at("product"), "product");
    r.viewpoint_order = j.at("viewpoint_order").get<std::vector<std::uint64_t>>();
    for (const auto& e : j.at("connections")) {
        Connection c;
        c.batch = e.at("batch").get<std::string>();
        c.level = e.at("level").get<int>();
        c.contributors = e.at("contributors").get<std::vector<std::uint64_t>>();
        r.connections.push_back(std::move(c));
    }
    return r;
}

}  // namespace js

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

class ViewpointEngine {
public:
    explicit ViewpointEngine(Repository& repo) : repo_(repo) {}

    Repository& repository() { return repo_; }

    // -- configuration ----------------------------------------------------------

    void set_config(const ViewpointConfig& cfg) {
        cfg.validate();
        repo_.store().put_config("viewpoints", cfg.to_json());
        cache_.reset();
    }

    const ViewpointConfig& config() const {
        if (!cache_) {
            auto doc = repo_.store().get_config("viewpoints");
            cache_ = doc ? ViewpointConfig::from_json(*doc) : ViewpointConfig{};
        }
        return *cache_;
    }

    // -- registration -------------------------------------------------------------

    EntityId register_user(const std::string& name, Situation situation,
                           const std::vector<std::pair<std::string, int>>& competences) {
        User u;
        u.id = repo_.store().mint(repo_.options().default_ns);
        u.name = name;
        u.situation = situation;
        u.competences = competences;
        register_user_pinned(u);
        return u.id;
    }

    void register_user_pinned(const User& u) {
        validate_user(u);
        if (repo_.store().exists(u.id))
            throw Error(Errc::invalid_spec, u.id.str() + " already exists");
        Json body = js::user_json(u);
        repo_.store().put(kinds::user, u.id, body);
        repo_.store().append_trace(u.id, TraceKind::created, std::nullopt, digest(body.dump()));
    }

    User user(const EntityId& id) const {
        auto k = repo_.store().kind_of(id);
        if (!k || *k != kinds::user) throw Error(Errc::unknown_user, id.str());
        return js::user_from(repo_.store().get(id));
    }

    std::uint64_t register_viewpoint(const EntityId& user_id, const std::string& domain_name,
                                     const std::string& activity, const std::string& focus,
                                     const EntityId& product) {
        Viewpoint v;
        v.vp = repo_.store().mint("vp").number;
        v.user = user_id;
        v.domain_name = domain_name;
        v.activity = activity;
        v.focus = focus;
        v.product = product;
        register_viewpoint_pinned(v);
        return v.vp;
    }

    // Fixture path: VP# pinned by the caller. The competence field is derived
    // from the user regardless of input, and relationship refs are rewired in
    // both directions.
    void register_viewpoint_pinned(Viewpoint v) {
        User u = user(v.user);
        const int* level = u.competence(v.activity);
        if (!level)
            throw Error(Errc::unknown_activity,
                        "user " + v.user.str() + " has no activity '" + v.activity + "'");
        if (!repo_.is_artifact(v.product)) throw Error(Errc::unknown_product, v.product.str());
        if (repo_.store().exists(v.record_id()))
            throw Error(Errc::invalid_spec, "VP#" + std::to_string(v.vp) + " already exists");
        for (const auto& other : all_viewpoints())
            if (other.user == v.user && other.activity == v.activity && other.product == v.product)
                throw Error(Errc::duplicate_viewpoint,
                            v.user.str() + "/" + v.activity + "/" + v.product.str());
        v.competence = *level;
        v.relationship_ref.reset();
        if (v.competence < 3) {
            if (auto l3 = level3_viewpoint(v.user, v.product)) v.relationship_ref = l3->vp;
        }
        Json body = js::viewpoint_json(v);
        repo_.store().put(kinds::viewpoint, v.record_id(), body);
        repo_.store().append_trace(v.record_id(), TraceKind::created, v.user, digest(body.dump()));
        if (v.competence == 3) {
            // Wire existing lower-competence viewpoints back to this one.
            for (const auto& other : all_viewpoints()) {
                if (other.user == v.user && other.product == v.product && other.vp != v.vp &&
                    other.competence < 3 && other.relationship_ref != std::optional(v.vp)) {
                    Viewpoint patched = other;
                    patched.relationship_ref = v.vp;
                    repo_.store().put(kinds::viewpoint, patched.record_id(),
                                      js::viewpoint_json(patched));
                }
            }
        }
    }

    Viewpoint viewpoint(std::uint64_t vp) const {
        EntityId rid{"vp", vp};
        auto k = repo_.store().kind_of(rid);
        if (!k || *k != kinds::viewpoint)
            throw Error(Errc::unknown_entity, "VP#" + std::to_string(vp));
        return js::viewpoint_from(repo_.store().get(rid));
    }

    std::vector<Viewpoint> all_viewpoints() const {
        std::vector<Viewpoint> out;
        for (const auto& id : repo_.store().list(kinds::viewpoint))
            out.push_back(js::viewpoint_from(repo_.store().get(id)));
        std::sort(out.begin(), out.end(),
                  [](const Viewpoint& a, const Viewpoint& b) { return a.vp < b.vp; });
        return out;
    }

    // -- the five filtering steps ---------------------------------------------------

    // Step 1: all of the user's viewpoints, stable order by VP#.
    std::vector<Viewpoint> restitution_list_viewpoint(const EntityId& user_id) const {
        auto k = repo_.store().kind_of(user_id);
        if (!k || *k != kinds::user) throw Error(Errc::unknown_user, user_id.str());
        std::vector<Viewpoint> out;
        for (auto& v : all_viewpoints())
            if (v.user == user_id) out.push_back(std::move(v));
        return out;
    }

    // Step 2: keep viewpoints aimed at the queried artifact (exact id match).
    static std::vector<Viewpoint> filtering_list_vp_artifact(std::vector<Viewpoint> vps,
                                                             const EntityId& product) {
        std::erase_if(vps, [&](const Viewpoint& v) { return v.product != product; });
        return vps;
    }

    // Step 3: order by competence, highest first; ties by ascending VP#.
    static std::vector<Viewpoint> classification_vp(std::vector<Viewpoint> vps) {
        for (size_t i = 1; i < vps.size(); ++i)
            if (vps[i].product != vps[0].product)
                throw Error(Errc::mixed_products, "classification input spans products");
        std::sort(vps.begin(), vps.end(), [](const Viewpoint& a, const Viewpoint& b) {
            if (a.competence != b.competence) return a.competence > b.competence;
            return a.vp < b.vp;
        });
        return vps;
    }

    // Step 4: the configured batch connections for one viewpoint.
    std::vector<BatchLevel> restitution_list_connexion_level(const Viewpoint& v) const {
        const ConnectionEntry* e = config().entry(v.activity, v.focus);
        if (!e)
            throw Error(Errc::no_connection_configured,
                        "(" + v.activity + ", " + v.focus + ")");
        return e->batches;
    }

    // Step 5: merge the accumulated list with the next viewpoint's list.
    // Union of batch names; a batch present in both keeps the minimum level;
    // accumulated order first, then new batches in the incoming order.
    static std::vector<BatchLevel> optimize_list_connexion_level(
        std::vector<BatchLevel> accumulated, const std::vector<BatchLevel>& next) {
        require_unique(accumulated);
        require_unique(next);
        for (const auto& n : next) {
            bool found = false;
            for (auto& a : accumulated) {
                if (a.batch == n.batch) {
                    a.level = std::min(a.level, n.level);
                    found = true;
                    break;
                }
            }
            if (!found) accumulated.push_back(n);
        }
        return accumulated;
    }

    // Whole pipeline: steps 1..5 plus contributor bookkeeping.
    FilterResult filtering_info_artifact(const EntityId& product, const EntityId& user_id) const {
        auto uk = repo_.store().kind_of(user_id);
        if (!uk || *uk != kinds::user) throw Error(Errc::unknown_user, user_id.str());
        if (!repo_.is_artifact(product)) throw Error(Errc::unknown_product, product.str());

        std::vector<Viewpoint> vps = restitution_list_viewpoint(user_id);
        vps = filtering_list_vp_artifact(std::move(vps), product);
        if (vps.empty())
            throw Error(Errc::no_viewpoint_on_product,
                        user_id.str() + " has no viewpoint on " + product.str());
        vps = classification_vp(std::move(vps));

        FilterResult result;
        result.user = user_id;
        result.product = product;
        for (const auto& v : vps) {
            result.viewpoint_order.push_back(v.vp);
            merge_with_contributors(result.connections, restitution_list_connexion_level(v), v.vp);
        }
        return result;
    }

    static void merge_with_contributors(std::vector<Connection>& accumulated,
                                        const std::vector<BatchLevel>& next, std::uint64_t vp) {
        for (const auto& n : next) {
            bool found = false;
            for (auto& a : accumulated) {
                if (a.batch == n.batch) {
                    a.level = std::min(a.level, n.level);
                    a.contributors.push_back(vp);
                    found = true;
                    break;
                }
            }
            if (!found) accumulated.push_back(Connection{n.batch, n.level, {vp}});
        }
    }

    // -- payload materialization ---------------------------------------------------

    Payload materialize(const FilterResult& result, int threshold = 3) const {
        if (threshold < 1 || threshold > 3)
            throw Error(Errc::invalid_threshold, std::to_string(threshold));
        Payload out;
        for (const auto& c : result.connections) {
            if (c.level > threshold) continue;
            auto it = config().selectors.find(c.batch);
            if (it == config().selectors.end())
                throw Error(Errc::unknown_batch_selector, "batch '" + c.batch + "'");
            out.push_back(Fragment{c.batch, c.level, resolve(it->second, result.product)});
        }
        return out;
    }

private:
    static void require_unique(const std::vector<BatchLevel>& list) {
        std::vector<std::string> names;
        for (const auto& b : list) names.push_back(b.batch);
        std::sort(names.begin(), names.end());
        if (std::adjacent_find(names.begin(), names.end()) != names.end())
            throw Error(Errc::invalid_spec, "batch list has duplicate names");
    }

    void validate_user(const User& u) const {
        if (u.name.empty()) throw Error(Errc::invalid_spec, "user name is empty");
        if (u.competences.empty())
            throw Error(Errc::competence_rule_violated, "user has no competences");
        int level3 = 0;
        std::vector<std::string> acts;
        for (const auto& [a, l] : u.competences) {
            if (l < 1 || l > 3)
                throw Error(Errc::invalid_level, "competence level " + std::to_string(l));
            if (l == 3) ++level3;
            acts.push_back(a);
        }
        std::sort(acts.begin(), acts.end());
        if (std::adjacent_find(acts.begin(), acts.end()) != acts.end())
            throw Error(Errc::invalid_spec, "duplicate activity in competences");
        if (level3 != 1)
            throw Error(Errc::competence_rule_violated,
                        "expected exactly one level-3 activity, found " + std::to_string(level3));
    }

    std::optional<Viewpoint> level3_viewpoint(const EntityId& user_id,
                                              const EntityId& product) const {
        for (const auto& v : all_viewpoints())
            if (v.user == user_id && v.product == product && v.competence == 3) return v;
        return std::nullopt;
    }

    std::vector<PayloadItem> resolve(const BatchSelector& sel, const EntityId& product) const {
        std::vector<PayloadItem> items;
        auto push_obj = [&](const EntityId& id) {
            TechnicalObject o = repo_.technical_object(id);
            items.push_back(PayloadItem{std::string(to_string(o.kind)), id.str(), o.name});
        };
        std::vector<EntityId> closure = repo_.composition_closure(product);
        auto referenced = [&](Kind kind) {
            std::vector<EntityId> out;
            std::set<EntityId> closure_set(closure.begin(), closure.end());
            for (const auto& rel : repo_.all_relationships()) {
                if (rel.kind != RelKind::reference || rel.members.size() != 2) continue;
                if (!closure_set.count(rel.members[0])) continue;
                auto k = repo_.store().kind_of(rel.members[1]);
                if (k && *k == kind_dir(kind)) out.push_back(rel.members[1]);
            }
            return out;
        };
        switch (sel.kind) {
            case SelectorKind::artifact: push_obj(product); break;
            case SelectorKind::functions:
                for (const auto& id : referenced(Kind::function)) push_obj(id);
                break;
            case SelectorKind::behaviors:
                for (const auto& id : referenced(Kind::behavior)) push_obj(id);
                break;
            case SelectorKind::flows:
                for (const auto& id : referenced(Kind::flow)) push_obj(id);
                break;
            case SelectorKind::form:
                for (const auto& id : referenced(Kind::form)) push_obj(id);
                break;
            case SelectorKind::sub_artifacts:
                for (size_t i = 1; i < closure.size(); ++i) push_obj(closure[i]);
                break;
            case SelectorKind::assembly: {
                std::set<EntityId> closure_set(closure.begin(), closure.end());
                for (const auto& rel : repo_.assembly_edges())
                    if (closure_set.count(rel.members[0]) && closure_set.count(rel.members[1]))
                        items.push_back(PayloadItem{"relationship", rel.id.str(),
                                                    rel.members[0].str() + " -> " +
                                                        rel.members[1].str()});
                break;
            }
            case SelectorKind::constraints: {
                std::set<EntityId> closure_set(closure.begin(), closure.end());
                for (const auto& rel : repo_.all_relationships()) {
                    bool touches = false;
                    for (const auto& m : rel.members)
                        if (closure_set.count(m)) touches = true;
                    if (!touches) continue;
                    for (const auto& c : rel.constraints)
                        items.push_back(PayloadItem{"constraint", c.id.str(), c.expression});
                }
                break;
            }
            case SelectorKind::requirements: {
                std::set<EntityId> related(closure.begin(), closure.end());
                for (const auto& id : referenced(Kind::function)) related.insert(id);
                for (const auto& id : referenced(Kind::form)) related.insert(id);
                for (const auto& rid : repo_.store().list(kinds::requirement)) {
                    Requirement r = repo_.requirement(rid);
                    if (related.count(r.target))
                        items.push_back(PayloadItem{"requirement", r.id.str(), r.text});
                }
                break;
            }
            case SelectorKind::group: {
                std::set<EntityId> seen;
                for (const auto& s : repo_.spaces_containing(product)) {
                    for (const auto& tr : s.teams) {
                        Team t = repo_.resolve_team(tr);
                        for (const auto& m : t.members) {
                            if (!seen.insert(m.user).second) continue;
                            User u = js::user_from(repo_.store().get(m.user));
                            items.push_back(PayloadItem{"user", u.id.str(), u.name});
                        }
                    }
                }
                break;
            }
            case SelectorKind::attributes: {
                Artifact a = repo_.artifact(product);
                for (const auto& [k, v] : a.base.attributes)
                    if (k.rfind(sel.prefix, 0) == 0)
                        items.push_back(PayloadItem{"attribute", k, v});
                break;
            }
        }
        return items;
    }

    Repository& repo_;
    mutable std::optional<ViewpointConfig> cache_;
};

}  // namespace ppco

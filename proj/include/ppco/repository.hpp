#pragma once

#include <set>
#include <string>
#include <vector>

#include "ppco/store.hpp"

namespace ppco {

namespace kinds {
inline constexpr const char* artifact = "artifact";
inline constexpr const char* function = "function";
inline constexpr const char* form = "form";
inline constexpr const char* behavior = "behavior";
inline constexpr const char* flow = "flow";
inline constexpr const char* relationship = "relationship";
inline constexpr const char* requirement = "requirement";
inline constexpr const char* process = "process";
inline constexpr const char* organization = "organization";
inline constexpr const char* space = "space";
inline constexpr const char* user = "user";
inline constexpr const char* viewpoint = "viewpoint";
inline constexpr const char* pending = "pending";
}  // namespace kinds

inline const char* kind_dir(Kind k) {
    switch (k) {
        case Kind::artifact: return kinds::artifact;
        case Kind::function: return kinds::function;
        case Kind::form: return kinds::form;
        case Kind::behavior: return kinds::behavior;
        case Kind::flow: return kinds::flow;
    }
    return kinds::artifact;
}

// Operations over the product model: creation, assembly structure, revisions,
// statutory transitions, job views. All mutations funnel through the store's
// single-writer contract.
class Repository {
public:
    struct Options {
        std::string default_ns = "local";  // namespace for freshly minted ids
        bool service_mode = false;         // direct revise() disallowed when set
    };

    explicit Repository(Store& store) : Repository(store, Options()) {}

    Repository(Store& store, Options opt) : store_(store), opt_(std::move(opt)) {}

    Store& store() { return store_; }
    const Store& store() const { return store_; }
    const Options& options() const { return opt_; }
    void set_service_mode(bool on) { opt_.service_mode = on; }

    // -- creation -------------------------------------------------------------

    EntityId create_artifact(Artifact spec) {
        validate_artifact_spec(spec);
        spec.base.id = store_.mint(opt_.default_ns);
        put_new_artifact(spec);
        return spec.base.id;
    }

    // Fixture path: the caller pins the id.
    void create_artifact_pinned(Artifact spec) {
        validate_artifact_spec(spec);
        if (!spec.base.id.valid()) throw Error(Errc::invalid_spec, "pinned artifact id invalid");
        put_new_artifact(spec);
    }

    void create_function(Function f) {
        f.base.kind = Kind::function;
        require_new(f.base);
        if (f.parent_function) {
            if (lookup_kind(*f.parent_function) != kinds::function)
                throw Error(Errc::unknown_entity, "parent function " + f.parent_function->str());
            // Parents exist before children, so following the chain up both
            // validates resolution and guards against decomposition cycles.
            EntityId cur = *f.parent_function;
            while (true) {
                if (cur == f.base.id)
                    throw Error(Errc::cycle_detected, "function decomposition cycle at " +
                                                          f.base.id.str());
                Function p = function(cur);
                if (!p.parent_function) break;
                cur = *p.parent_function;
            }
        }
        put_created(kinds::function, f.base.id, js::function_json(f), f.base.statutory);
    }

    void create_form(Form f) {
        f.base.kind = Kind::form;
        require_new(f.base);
        validate(f.geometry);
        validate(f.material);
        put_created(kinds::form, f.base.id, js::form_json(f), f.base.statutory);
    }

    void create_behavior(Behavior b) {
        b.base.kind = Kind::behavior;
        require_new(b.base);
        if (lookup_kind(b.implements_function) != kinds::function)
            throw Error(Errc::unknown_entity,
                        "behavior target function " + b.implements_function.str());
        put_created(kinds::behavior, b.base.id, js::behavior_json(b), b.base.statutory);
    }

    void create_flow(TechnicalObject o) {
        o.kind = Kind::flow;
        require_new(o);
        put_created(kinds::flow, o.id, js::tobj_json(o), o.statutory);
    }

    void create_requirement(const Requirement& r) {
        if (store_.exists(r.id)) throw Error(Errc::invalid_spec, r.id.str() + " already exists");
        std::string target_kind = lookup_kind(r.target);
        const char* want = r.applies_to == RequirementTarget::function ? kinds::function : kinds::form;
        if (target_kind != want)
            throw Error(Errc::invalid_spec, "requirement " + r.id.str() + " targets a " +
                                                target_kind + ", expected " + want);
        if (r.text.empty()) throw Error(Errc::invalid_spec, "requirement text is empty");
        store_.put(kinds::requirement, r.id, js::requirement_json(r));
        trace_created(r.id, js::requirement_json(r));
    }

    void create_process(const Process& p) {
        if (p.activities.empty())
            throw Error(Errc::invalid_spec, "process " + p.id.str() + " has no activities");
        for (const auto& a : p.activities) {
            if (a.name.empty())
                throw Error(Errc::invalid_spec, "activity " + a.id.str() + " has empty name");
            for (const auto& in : a.inputs) lookup_kind(in);
            for (const auto& out : a.outputs) lookup_kind(out);
            for (const auto& r : a.resources) {
                if (r.kind == ResourceKind::actor) {
                    auto id = EntityId::try_parse(r.ref);
                    if (!id || lookup_kind(*id) != kinds::user)
                        throw Error(Errc::unknown_user, "actor resource '" + r.ref + "'");
                }
            }
        }
        store_.put(kinds::process, p.id, js::process_json(p));
        trace_created(p.id, js::process_json(p));
    }

    void create_organization(const Organization& o) {
        validate(o);
        if (store_.exists(o.id)) throw Error(Errc::invalid_spec, o.id.str() + " already exists");
        store_.put(kinds::organization, o.id, js::organization_json(o));
        trace_created(o.id, js::organization_json(o));
    }

    void create_space(const CollaborationSpace& s) {
        if (s.products.empty())
            throw Error(Errc::invalid_spec, "space " + s.id.str() + " has no products");
        for (const auto& p : s.products)
            if (lookup_kind(p) != kinds::artifact)
                throw Error(Errc::unknown_entity, "space product " + p.str());
        for (const auto& t : s.teams) resolve_team(t);
        require_teams_connected(s);
        store_.put(kinds::space, s.id, js::space_json(s));
        trace_created(s.id, js::space_json(s));
    }

    void create_relationship(Relationship r) {
        if (r.kind == RelKind::assembly) {
            if (r.members.size() != 2)
                throw Error(Errc::invalid_spec, "assembly link needs exactly 2 members");
            add_assembly_link_pinned(r.id, r.members[0], r.members[1], r.constraints);
            return;
        }
        ppco::validate(r);
        if (store_.exists(r.id)) throw Error(Errc::invalid_spec, r.id.str() + " already exists");
        for (const auto& m : r.members) lookup_kind(m);
        store_.put(kinds::relationship, r.id, js::relationship_json(r));
        append_relationship_order(r.id);
        trace_created(r.id, js::relationship_json(r));
    }

    // -- assembly structure -----------------------------------------------------

    EntityId add_assembly_link(const EntityId& parent, const EntityId& child,
                               std::vector<Constraint> constraints = {}) {
        EntityId id = store_.mint(opt_.default_ns);
        add_assembly_link_pinned(id, parent, child, std::move(constraints));
        return id;
    }

    void add_assembly_link_pinned(const EntityId& id, const EntityId& parent,
                                  const EntityId& child, std::vector<Constraint> constraints) {
        if (store_.exists(id)) throw Error(Errc::invalid_spec, id.str() + " already exists");
        Artifact p = artifact(parent);
        Artifact c = artifact(child);
        if (p.composition == Composition::basis)
            throw Error(Errc::invalid_spec,
                        parent.str() + " is a basis artifact and admits no children");
        if (c.composition == Composition::finished)
            throw Error(Errc::invalid_spec,
                        child.str() + " is a finished artifact and cannot be a child");
        for (const auto& e : assembly_edges())
            if (e.members[0] == parent && e.members[1] == child)
                throw Error(Errc::invalid_spec,
                            "assembly link " + parent.str() + " -> " + child.str() + " exists");
        if (parent == child || reachable(child, parent))
            throw Error(Errc::cycle_detected,
                        parent.str() + " -> " + child.str() + " would close a cycle");
        Relationship r;
        r.id = id;
        r.kind = RelKind::assembly;
        r.members = {parent, child};
        r.constraints = std::move(constraints);
        ppco::validate(r);
        store_.put(kinds::relationship, id, js::relationship_json(r));
        append_relationship_order(id);
        trace_created(id, js::relationship_json(r));
    }

    // Depth-first preorder over assembly children, child order = insertion
    // order, every id exactly once.
    std::vector<EntityId> composition_closure(const EntityId& root) const {
        lookup_kind(root);
        std::vector<EntityId> out;
        std::set<EntityId> seen;
        closure_visit(root, out, seen);
        return out;
    }

    std::vector<EntityId> assembly_children(const EntityId& parent) const {
        std::vector<EntityId> out;
        for (const auto& e : assembly_edges())
            if (e.members[0] == parent) out.push_back(e.members[1]);
        return out;
    }

    std::vector<EntityId> assembly_ancestors(const EntityId& node) const {
        std::vector<EntityId> out;
        std::set<EntityId> seen;
        ancestors_visit(node, out, seen);
        return out;
    }

    // All assembly relationships, insertion order.
    std::vector<Relationship> assembly_edges() const {
        std::vector<Relationship> out;
        for (const auto& id : relationship_order()) {
            Relationship r = relationship(id);
            if (r.kind == RelKind::assembly) out.push_back(std::move(r));
        }
        return out;
    }

    std::vector<Relationship> all_relationships() const {
        std::vector<Relationship> out;
        for (const auto& id : relationship_order()) out.push_back(relationship(id));
        return out;
    }

    // -- revisions -----------------------------------------------------------------

    // Library-mode entry; in service mode revisions happen only through the
    // collaboration workflow's commit path.
    std::uint32_t revise(const EntityId& object, const AttrMap& changes) {
        if (opt_.service_mode)
            throw Error(Errc::no_right,
                        "direct revision is disabled in service mode; submit an update");
        return apply_revision(object, changes);
    }

    // The workflow's commit path.
    std::uint32_t commit_revision(const EntityId& object, const AttrMap& changes) {
        return apply_revision(object, changes);
    }

    // -- statutory state ------------------------------------------------------------

    StatutoryState set_statutory(const EntityId& object, StatutoryState next) {
        require_technical(object);
        StatutoryState old = store_.statutory(object);
        if (!legal_transition(old, next))
            throw Error(Errc::illegal_transition, object.str() + ": " + std::string(to_string(old)) +
                                                      " -> " + std::string(to_string(next)));
        store_.write_statutory(object, next);
        store_.append_trace(object, TraceKind::state_changed, std::nullopt,
                            digest(std::string(to_string(old)) + "->" + std::string(to_string(next))));
        return old;
    }

    StatutoryState statutory(const EntityId& object) const {
        require_technical(object);
        return store_.statutory(object);
    }

    // -- job views -------------------------------------------------------------------

    void register_job_view(const JobView& v) {
        if (v.name.empty()) throw Error(Errc::invalid_spec, "job view name is empty");
        Json doc = store_.get_config("job_views").value_or(Json::array());
        for (const auto& e : doc)
            if (e.at("name").get<std::string>() == v.name)
                throw Error(Errc::duplicate_name, "job view '" + v.name + "'");
        doc.push_back(js::job_view_json(v));
        store_.put_config("job_views", doc);
    }

    std::vector<JobView> job_views() const {
        std::vector<JobView> out;
        for (const auto& e : store_.get_config("job_views").value_or(Json::array()))
            out.push_back(js::job_view_from(e));
        return out;
    }

    std::vector<std::pair<Relationship, TechnicalObject>> resolve_job_view(
        const std::string& view_name, const EntityId& root) const {
        std::optional<JobView> view;
        for (auto& v : job_views())
            if (v.name == view_name) view = std::move(v);
        if (!view) throw Error(Errc::unknown_view, "job view '" + view_name + "'");
        std::vector<EntityId> closure = composition_closure(root);
        std::map<EntityId, size_t> pos;
        for (size_t i = 0; i < closure.size(); ++i) pos[closure[i]] = i;

        struct Hit {
            size_t closure_pos;
            Relationship rel;
        };
        std::vector<Hit> hits;
        for (const auto& rel : all_relationships()) {
            if (!matches(*view, rel)) continue;
            std::optional<size_t> best;
            for (const auto& m : rel.members) {
                auto it = pos.find(m);
                if (it != pos.end() && (!best || it->second < *best)) best = it->second;
            }
            if (best) hits.push_back(Hit{*best, rel});
        }
        std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
            if (a.closure_pos != b.closure_pos) return a.closure_pos < b.closure_pos;
            return a.rel.id < b.rel.id;
        });
        std::vector<std::pair<Relationship, TechnicalObject>> out;
        for (const auto& h : hits)
            for (const auto& m : h.rel.members)
                if (is_technical(m)) out.emplace_back(h.rel, technical_object(m));
        return out;
    }

    // -- domain links ---------------------------------------------------------------------

    void set_domain_links(const std::vector<ActivityDomainLink>& links) {
        Json doc = Json::array();
        for (const auto& l : links) doc.push_back(js::domain_link_json(l));
        store_.put_config("activity_domain_links", doc);
    }

    std::vector<ActivityDomainLink> domain_links() const {
        std::vector<ActivityDomainLink> out;
        for (const auto& e : store_.get_config("activity_domain_links").value_or(Json::array()))
            out.push_back(js::domain_link_from(e));
        return out;
    }

    // -- typed getters -----------------------------------------------------------------------

    Artifact artifact(const EntityId& id, std::optional<std::uint32_t> rev = std::nullopt) const {
        if (lookup_kind(id) != kinds::artifact) throw Error(Errc::unknown_entity, id.str());
        return js::artifact_from(store_.get(id, rev));
    }

    Function function(const EntityId& id) const {
        if (lookup_kind(id) != kinds::function) throw Error(Errc::unknown_entity, id.str());
        return js::function_from(store_.get(id));
    }

    Form form(const EntityId& id) const {
        if (lookup_kind(id) != kinds::form) throw Error(Errc::unknown_entity, id.str());
        return js::form_from(store_.get(id));
    }

    Behavior behavior(const EntityId& id) const {
        if (lookup_kind(id) != kinds::behavior) throw Error(Errc::unknown_entity, id.str());
        return js::behavior_from(store_.get(id));
    }

    Relationship relationship(const EntityId& id) const {
        if (lookup_kind(id) != kinds::relationship) throw Error(Errc::unknown_entity, id.str());
        return js::relationship_from(store_.get(id));
    }

    Requirement requirement(const EntityId& id) const {
        if (lookup_kind(id) != kinds::requirement) throw Error(Errc::unknown_entity, id.str());
        return js::requirement_from(store_.get(id));
    }

    Organization organization(const EntityId& id) const {
        if (lookup_kind(id) != kinds::organization) throw Error(Errc::unknown_entity, id.str());
        return js::organization_from(store_.get(id));
    }

    CollaborationSpace space(const EntityId& id) const {
        if (lookup_kind(id) != kinds::space) throw Error(Errc::unknown_entity, id.str());
        return js::space_from(store_.get(id));
    }

    Process process(const EntityId& id) const {
        if (lookup_kind(id) != kinds::process) throw Error(Errc::unknown_entity, id.str());
        return js::process_from(store_.get(id));
    }

    TechnicalObject technical_object(const EntityId& id,
                                     std::optional<std::uint32_t> rev = std::nullopt) const {
        require_technical(id);
        return js::tobj_from(store_.get(id, rev));
    }

    bool is_artifact(const EntityId& id) const {
        auto k = store_.kind_of(id);
        return k && *k == kinds::artifact;
    }

    bool is_technical(const EntityId& id) const {
        auto k = store_.kind_of(id);
        return k && (*k == kinds::artifact || *k == kinds::function || *k == kinds::form ||
                     *k == kinds::behavior || *k == kinds::flow);
    }

    // Team lookup, validating that the ref resolves.
    Team resolve_team(const TeamRef& ref) const {
        Organization org = organization(ref.org);
        for (auto& t : org.teams)
            if (t.name == ref.team) return t;
        throw Error(Errc::unknown_entity, "team " + ref.str());
    }

    // Spaces whose product list contains the given artifact.
    std::vector<CollaborationSpace> spaces_containing(const EntityId& product) const {
        std::vector<CollaborationSpace> out;
        for (const auto& id : store_.list(kinds::space)) {
            CollaborationSpace s = space(id);
            if (std::find(s.products.begin(), s.products.end(), product) != s.products.end())
                out.push_back(std::move(s));
        }
        return out;
    }

    bool user_has_right(const EntityId& user, const EntityId& product, Right right) const {
        for (const auto& s : spaces_containing(product)) {
            for (const auto& tr : s.teams) {
                Team t = resolve_team(tr);
                for (const auto& m : t.members)
                    if (m.user == user && m.role.has(right)) return true;
            }
        }
        return false;
    }

private:
    void validate_artifact_spec(const Artifact& spec) const {
        if (spec.base.name.empty()) throw Error(Errc::invalid_spec, "artifact name is empty");
        if (spec.base.effectivity) ppco::validate(*spec.base.effectivity);
    }

    void put_new_artifact(Artifact spec) {
        if (store_.options().name_unique) {
            for (const auto& id : store_.list(kinds::artifact))
                if (artifact(id).base.name == spec.base.name)
                    throw Error(Errc::duplicate_name, "artifact name '" + spec.base.name + "'");
        }
        spec.base.kind = Kind::artifact;
        spec.base.revision = 1;
        if (store_.exists(spec.base.id))
            throw Error(Errc::invalid_spec, spec.base.id.str() + " already exists");
        put_created(kinds::artifact, spec.base.id, js::artifact_json(spec), spec.base.statutory);
    }

    void require_new(const TechnicalObject& o) const {
        if (!o.id.valid()) throw Error(Errc::invalid_spec, "entity id invalid");
        if (o.name.empty()) throw Error(Errc::invalid_spec, "name is empty");
        if (store_.exists(o.id)) throw Error(Errc::invalid_spec, o.id.str() + " already exists");
        if (o.effectivity) ppco::validate(*o.effectivity);
    }

    void put_created(const char* kind, const EntityId& id, const Json& body, StatutoryState st) {
        store_.put(kind, id, body);
        store_.write_statutory(id, st);
        trace_created(id, body);
    }

    void trace_created(const EntityId& id, const Json& body) {
        store_.append_trace(id, TraceKind::created, std::nullopt, digest(body.dump()));
    }

    std::string lookup_kind(const EntityId& id) const {
        auto k = store_.kind_of(id);
        if (!k) throw Error(Errc::unknown_entity, id.str());
        return *k;
    }

    void require_technical(const EntityId& id) const {
        if (!is_technical(id)) throw Error(Errc::unknown_entity, id.str());
    }

    std::uint32_t apply_revision(const EntityId& object, const AttrMap& changes) {
        require_technical(object);
        std::string kind = lookup_kind(object);
        Json j = store_.get(object);
        std::uint32_t next = j.at("revision").get<std::uint32_t>() + 1;
        j["revision"] = next;
        AttrMap attrs = js::attrs_from(j.at("attributes"));
        for (const auto& [k, v] : changes) attr_set(attrs, k, v);
        j["attributes"] = js::attrs_json(attrs);
        store_.put(kind, object, j);
        return next;
    }

    std::vector<EntityId> relationship_order() const {
        std::vector<EntityId> out;
        for (const auto& e : store_.get_config("relationship_order").value_or(Json::array()))
            out.push_back(EntityId::parse(e.get<std::string>()));
        return out;
    }

    void append_relationship_order(const EntityId& id) {
        Json doc = store_.get_config("relationship_order").value_or(Json::array());
        doc.push_back(id.str());
        store_.put_config("relationship_order", doc);
    }

    bool reachable(const EntityId& from, const EntityId& to) const {
        if (from == to) return true;
        for (const auto& c : assembly_children(from))
            if (reachable(c, to)) return true;
        return false;
    }

    void closure_visit(const EntityId& node, std::vector<EntityId>& out,
                       std::set<EntityId>& seen) const {
        if (!seen.insert(node).second) return;
        out.push_back(node);
        for (const auto& c : assembly_children(node)) closure_visit(c, out, seen);
    }

    void ancestors_visit(const EntityId& node, std::vector<EntityId>& out,
                         std::set<EntityId>& seen) const {
        for (const auto& e : assembly_edges()) {
            if (e.members[1] == node && seen.insert(e.members[0]).second) {
                out.push_back(e.members[0]);
                ancestors_visit(e.members[0], out, seen);
            }
        }
    }

    static bool member_attr_matches(const TechnicalObject& obj,
                                    const std::pair<std::string, std::string>& kv) {
        const std::string* v = attr_get(obj.attributes, kv.first);
        return v && *v == kv.second;
    }

    bool matches(const JobView& view, const Relationship& rel) const {
        for (const auto& sel : view.selector) {
            if (sel.kind != rel.kind) continue;
            if (!sel.member_attr) return true;
            for (const auto& m : rel.members)
                if (is_technical(m) && member_attr_matches(technical_object(m), *sel.member_attr))
                    return true;
        }
        return false;
    }

    // Teams of a space must form one connected component: an edge exists when
    // one team's connectors name the other team, and naming the space id
    // connects through the space as a hub.
    void require_teams_connected(const CollaborationSpace& s) const {
        if (s.teams.size() < 2) return;
        size_t n = s.teams.size();
        std::vector<std::vector<std::string>> conns(n);
        std::vector<bool> hub(n, false);
        for (size_t i = 0; i < n; ++i) {
            Team t = resolve_team(s.teams[i]);
            conns[i] = t.connectors;
            for (const auto& c : t.connectors)
                if (c == s.id.str()) hub[i] = true;
        }
        std::vector<std::vector<size_t>> adj(n);
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                bool linked = (hub[i] && hub[j]);
                for (const auto& c : conns[i])
                    if (c == s.teams[j].str()) linked = true;
                if (linked) {
                    adj[i].push_back(j);
                    adj[j].push_back(i);
                }
            }
        }
        std::vector<bool> seen(n, false);
        std::vector<size_t> stack{0};
        seen[0] = true;
        while (!stack.empty()) {
            size_t cur = stack.back();
            stack.pop_back();
            for (size_t nb : adj[cur]) {
                if (!seen[nb]) {
                    seen[nb] = true;
                    stack.push_back(nb);
                }
            }
        }
        for (size_t i = 0; i < n; ++i)
            if (!seen[i])
                throw Error(Errc::invalid_spec, "space " + s.id.str() + ": team " +
                                                    s.teams[i].str() + " unreachable via connectors");
    }

    Store& store_;
    Options opt_;
};

}  // namespace ppco

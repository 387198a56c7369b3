#pragma once

#include <array>
#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ppco/core.hpp"

namespace ppco {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

enum class Kind { artifact, function, form, behavior, flow };
enum class StatutoryState { created, wait_validation, update_is_accepted, rejected };
enum class Abstraction { physical, product_type, generic };
enum class Composition { basis, semi_finished, finished };
enum class RelKind { assembly, undirected_set, directed_set, reference, constraint_link };
enum class ConstraintTarget { link, domain };
enum class RequirementTarget { function, form };
enum class ProcessKind { business, informational_organizational };
enum class ResourceKind { actor, tool, machine, other };
enum class Right { read, propose_update, approve };
enum class CollaborationLevel { communicative, collective, cooperative, coordinated, concerted };
enum class Situation {
    Designer, Engineer, Supplier, Manufacturer, Distributor, Manager, Partner, Client,
    OtherSituation
};
enum class Profile { Design, Manufacturing, Supplying, Distribution, Maintenance, Client,
                     Partnering };

namespace detail {

template <typename E, size_t N>
std::string_view enum_name(const std::array<std::string_view, N>& names, E v) {
    return names[static_cast<size_t>(v)];
}

template <typename E, size_t N>
E enum_value(const std::array<std::string_view, N>& names, std::string_view s, const char* what) {
    for (size_t i = 0; i < N; ++i)
        if (names[i] == s) return static_cast<E>(i);
    throw Error(Errc::invalid_enum, "bad " + std::string(what) + " '" + std::string(s) + "'");
}

inline constexpr std::array<std::string_view, 5> kind_names{"artifact", "function", "form",
                                                            "behavior", "flow"};
inline constexpr std::array<std::string_view, 4> statutory_names{
    "created", "wait_validation", "update_is_accepted", "rejected"};
inline constexpr std::array<std::string_view, 3> abstraction_names{"physical", "product_type",
                                                                   "generic"};
inline constexpr std::array<std::string_view, 3> composition_names{"basis", "semi_finished",
                                                                   "finished"};
inline constexpr std::array<std::string_view, 5> rel_kind_names{
    "assembly", "undirected_set", "directed_set", "reference", "constraint_link"};
inline constexpr std::array<std::string_view, 2> constraint_target_names{"link", "domain"};
inline constexpr std::array<std::string_view, 2> requirement_target_names{"function", "form"};
inline constexpr std::array<std::string_view, 2> process_kind_names{
    "business", "informational_organizational"};
inline constexpr std::array<std::string_view, 4> resource_kind_names{"actor", "tool", "machine",
                                                                     "other"};
inline constexpr std::array<std::string_view, 3> right_names{"read", "propose_update", "approve"};
inline constexpr std::array<std::string_view, 5> collaboration_level_names{
    "communicative", "collective", "cooperative", "coordinated", "concerted"};
inline constexpr std::array<std::string_view, 9> situation_names{
    "Designer", "Engineer", "Supplier", "Manufacturer", "Distributor", "Manager", "Partner",
    "Client", "OtherSituation"};
inline constexpr std::array<std::string_view, 7> profile_names{
    "Design", "Manufacturing", "Supplying", "Distribution", "Maintenance", "Client", "Partnering"};

}  // namespace detail

inline std::string_view to_string(Kind v) { return detail::enum_name(detail::kind_names, v); }
inline std::string_view to_string(StatutoryState v) {
    return detail::enum_name(detail::statutory_names, v);
}
inline std::string_view to_string(Abstraction v) {
    return detail::enum_name(detail::abstraction_names, v);
}
inline std::string_view to_string(Composition v) {
    return detail::enum_name(detail::composition_names, v);
}
inline std::string_view to_string(RelKind v) { return detail::enum_name(detail::rel_kind_names, v); }
inline std::string_view to_string(ConstraintTarget v) {
    return detail::enum_name(detail::constraint_target_names, v);
}
inline std::string_view to_string(RequirementTarget v) {
    return detail::enum_name(detail::requirement_target_names, v);
}
inline std::string_view to_string(ProcessKind v) {
    return detail::enum_name(detail::process_kind_names, v);
}
inline std::string_view to_string(ResourceKind v) {
    return detail::enum_name(detail::resource_kind_names, v);
}
inline std::string_view to_string(Right v) { return detail::enum_name(detail::right_names, v); }
inline std::string_view to_string(CollaborationLevel v) {
    return detail::enum_name(detail::collaboration_level_names, v);
}
inline std::string_view to_string(Situation v) {
    return detail::enum_name(detail::situation_names, v);
}
inline std::string_view to_string(Profile v) { return detail::enum_name(detail::profile_names, v); }

inline Kind kind_from(std::string_view s) {
    return detail::enum_value<Kind>(detail::kind_names, s, "kind");
}
inline StatutoryState statutory_from(std::string_view s) {
    return detail::enum_value<StatutoryState>(detail::statutory_names, s, "statutory state");
}
inline Abstraction abstraction_from(std::string_view s) {
    return detail::enum_value<Abstraction>(detail::abstraction_names, s, "abstraction");
}
inline Composition composition_from(std::string_view s) {
    return detail::enum_value<Composition>(detail::composition_names, s, "composition");
}
inline RelKind rel_kind_from(std::string_view s) {
    return detail::enum_value<RelKind>(detail::rel_kind_names, s, "relationship kind");
}
inline ConstraintTarget constraint_target_from(std::string_view s) {
    return detail::enum_value<ConstraintTarget>(detail::constraint_target_names, s,
                                                "constraint target");
}
inline RequirementTarget requirement_target_from(std::string_view s) {
    return detail::enum_value<RequirementTarget>(detail::requirement_target_names, s,
                                                 "requirement target");
}
inline ProcessKind process_kind_from(std::string_view s) {
    return detail::enum_value<ProcessKind>(detail::process_kind_names, s, "process kind");
}
inline ResourceKind resource_kind_from(std::string_view s) {
    return detail::enum_value<ResourceKind>(detail::resource_kind_names, s, "resource kind");
}
inline Right right_from(std::string_view s) {
    return detail::enum_value<Right>(detail::right_names, s, "right");
}
inline CollaborationLevel collaboration_level_from(std::string_view s) {
    return detail::enum_value<CollaborationLevel>(detail::collaboration_level_names, s,
                                                  "collaboration level");
}
inline Situation situation_from(std::string_view s) {
    return detail::enum_value<Situation>(detail::situation_names, s, "situation");
}
inline Profile profile_from(std::string_view s) {
    return detail::enum_value<Profile>(detail::profile_names, s, "profile");
}

// Legal statutory transitions; everything else is rejected.
inline bool legal_transition(StatutoryState from, StatutoryState to) {
    using S = StatutoryState;
    switch (from) {
        case S::created: return to == S::wait_validation;
        case S::wait_validation: return to == S::update_is_accepted || to == S::rejected;
        case S::update_is_accepted: return to == S::wait_validation;
        case S::rejected: return to == S::wait_validation;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Core product types
// ---------------------------------------------------------------------------

// Insertion-ordered attribute map.
using AttrMap = std::vector<std::pair<std::string, std::string>>;

inline const std::string* attr_get(const AttrMap& m, std::string_view key) {
    for (const auto& [k, v] : m)
        if (k == key) return &v;
    return nullptr;
}

inline void attr_set(AttrMap& m, std::string_view key, std::string value) {
    for (auto& [k, v] : m) {
        if (k == key) {
            v = std::move(value);
            return;
        }
    }
    m.emplace_back(std::string(key), std::move(value));
}

// Closed effectivity interval; timestamps compared lexically (ISO-8601 UTC).
struct TimeInterval {
    std::string from;
    std::string to;
    bool operator==(const TimeInterval&) const = default;
};

struct TechnicalObject {
    EntityId id;
    Kind kind = Kind::artifact;
    std::string name;
    StatutoryState statutory = StatutoryState::created;
    std::uint32_t revision = 1;
    std::optional<TimeInterval> effectivity;
    AttrMap attributes;
    bool operator==(const TechnicalObject&) const = default;
};

struct Artifact {
    TechnicalObject base;
    Abstraction abstraction = Abstraction::physical;
    Composition composition = Composition::finished;
    bool operator==(const Artifact&) const = default;
};

struct Function {
    TechnicalObject base;
    std::string description;
    std::optional<EntityId> parent_function;
    bool operator==(const Function&) const = default;
};

struct Geometry {
    std::string shape_descriptor;
    std::optional<std::array<double, 3>> bounding_dims;  // mm
    bool operator==(const Geometry&) const = default;
};

struct Material {
    std::string name;
    std::optional<std::string> grade;
    bool operator==(const Material&) const = default;
};

struct Form {
    TechnicalObject base;
    Geometry geometry;
    Material material;
    bool operator==(const Form&) const = default;
};

struct Behavior {
    TechnicalObject base;
    EntityId implements_function;
    std::string causal_model;
    bool operator==(const Behavior&) const = default;
};

struct Constraint {
    EntityId id;
    ConstraintTarget target = ConstraintTarget::link;
    std::string expression;
    bool violated = false;
    bool operator==(const Constraint&) const = default;
};

// Two role-tagged member subsets of a directed set relationship.
struct RolePartition {
    std::string first_role;
    std::vector<EntityId> first;
    std::string second_role;
    std::vector<EntityId> second;
    bool operator==(const RolePartition&) const = default;
};

struct Relationship {
    EntityId id;
    RelKind kind = RelKind::reference;
    std::vector<EntityId> members;
    std::optional<RolePartition> roles;
    std::vector<Constraint> constraints;
    bool operator==(const Relationship&) const = default;
};

struct Requirement {
    EntityId id;
    RequirementTarget applies_to = RequirementTarget::function;
    EntityId target;
    std::string text;
    bool operator==(const Requirement&) const = default;
};

struct JobViewSelector {
    RelKind kind = RelKind::assembly;
    // Optional (key, value) that some member object's attributes must carry.
    std::optional<std::pair<std::string, std::string>> member_attr;
    bool operator==(const JobViewSelector&) const = default;
};

struct JobView {
    std::string name;
    std::vector<JobViewSelector> selector;
    bool operator==(const JobView&) const = default;
};

// ---------------------------------------------------------------------------
// Process types
// ---------------------------------------------------------------------------

struct Resource {
    ResourceKind kind = ResourceKind::other;
    std::string ref;  // entity id string for actors, free text otherwise
    bool operator==(const Resource&) const = default;
};

struct Activity {
    EntityId id;
    std::string name;
    std::string objective;
    std::vector<Constraint> pre_conditions;
    std::vector<Constraint> post_conditions;
    std::vector<Resource> resources;
    std::vector<EntityId> inputs;
    std::vector<EntityId> outputs;
    bool operator==(const Activity&) const = default;
};

struct Process {
    EntityId id;
    ProcessKind kind = ProcessKind::business;
    std::vector<Activity> activities;
    bool operator==(const Process&) const = default;
};

// ---------------------------------------------------------------------------
// Organization and collaboration types
// ---------------------------------------------------------------------------

struct Role {
    std::string name;
    std::vector<Right> rights;  // kept sorted, unique
    bool has(Right r) const { return std::find(rights.begin(), rights.end(), r) != rights.end(); }
    bool operator==(const Role&) const = default;
};

struct TeamMember {
    EntityId user;
    Role role;
    bool operator==(const TeamMember&) const = default;
};

// A team inside one organization, addressed as "<org id>/<team name>".
struct TeamRef {
    EntityId org;
    std::string team;
    auto operator<=>(const TeamRef&) const = default;
    std::string str() const { return org.str() + "/" + team; }
    static TeamRef parse(std::string_view s) {
        auto slash = s.find('/');
        if (slash == std::string_view::npos || slash + 1 >= s.size())
            throw Error(Errc::invalid_spec, "bad team ref '" + std::string(s) + "'");
        return TeamRef{EntityId::parse(s.substr(0, slash)), std::string(s.substr(slash + 1))};
    }
};

struct Team {
    std::string name;
    std::string objective;
    std::vector<std::string> connectors;  // team refs or collaboration space ids
    std::vector<TeamMember> members;
    bool operator==(const Team&) const = default;
};

struct Organization {
    EntityId id;
    std::string name;
    std::vector<Team> teams;
    bool operator==(const Organization&) const = default;
};

struct CollaborationSpace {
    EntityId id;
    CollaborationLevel level = CollaborationLevel::cooperative;
    std::vector<TeamRef> teams;
    std::vector<EntityId> products;
    bool operator==(const CollaborationSpace&) const = default;
};

// Inert configuration row tying a collaborator profile to one activity/domain pair.
struct ActivityDomainLink {
    Profile profile = Profile::Design;
    std::string activity;
    std::string domain;
    bool operator==(const ActivityDomainLink&) const = default;
};

// ---------------------------------------------------------------------------
// JSON serialization (ordered keys; attribute maps as [key, value] pairs)
// ---------------------------------------------------------------------------

namespace js {

inline Json id_json(const EntityId& id) { return id.str(); }

inline EntityId id_from(const Json& j, const char* what) {
    if (!j.is_string()) throw Error(Errc::invalid_spec, std::string(what) + " must be a string id");
    return EntityId::parse(j.get<std::string>());
}

inline Json ids_json(const std::vector<EntityId>& ids) {
    Json a = Json::array();
    for (const auto& id : ids) a.push_back(id.str());
    return a;
}

inline std::vector<EntityId> ids_from(const Json& j, const char* what) {
    std::vector<EntityId> out;
    for (const auto& e : j) out.push_back(id_from(e, what));
    return out;
}

inline Json attrs_json(const AttrMap& m) {
    Json a = Json::array();
    for (const auto& [k, v] : m) a.push_back(Json::array({k, v}));
    return a;
}

inline AttrMap attrs_from(const Json& j) {
    AttrMap m;
    for (const auto& e : j) m.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    return m;
}

inline Json tobj_json(const TechnicalObject& o) {
    Json j;
    j["id"] = o.id.str();
    j["kind"] = to_string(o.kind);
    j["name"] = o.name;
    j["statutory"] = to_string(o.statutory);
    j["revision"] = o.revision;
    if (o.effectivity)
        j["effectivity"] = Json{{"from", o.effectivity->from}, {"to", o.effectivity->to}};
    else
        j["effectivity"] = nullptr;
    j["attributes"] = attrs_json(o.attributes);
    return j;
}

inline TechnicalObject tobj_from(const Json& j) {
    TechnicalObject o;
    o.id = id_from(j.at("id"), "id");
    o.kind = kind_from(j.at("kind").get<std::string>());
    o.name = j.at("name").get<std::string>();
    o.statutory = statutory_from(j.at("statutory").get<std::string>());
    o.revision = j.at("revision").get<std::uint32_t>();
    if (j.contains("effectivity") && !j.at("effectivity").is_null())
        o.effectivity = TimeInterval{j.at("effectivity").at("from").get<std::string>(),
                                     j.at("effectivity").at("to").get<std::string>()};
    if (j.contains("attributes")) o.attributes = attrs_from(j.at("attributes"));
    return o;
}

inline Json artifact_json(const Artifact& a) {
    Json j = tobj_json(a.base);
    j["abstraction"] = to_string(a.abstraction);
    j["composition"] = to_string(a.composition);
    return j;
}

inline Artifact artifact_from(const Json& j) {
    Artifact a;
    a.base = tobj_from(j);
    a.abstraction = abstraction_from(j.at("abstraction").get<std::string>());
    a.composition = composition_from(j.at("composition").get<std::string>());
    return a;
}

inline Json function_json(const Function& f) {
    Json j = tobj_json(f.base);
    j["description"] = f.description;
    j["parent_function"] = f.parent_function ? Json(f.parent_function->str()) : Json(nullptr);
    return j;
}

inline Function function_from(const Json& j) {
    Function f;
    f.base = tobj_from(j);
    f.description = j.at("description").get<std::string>();
    if (j.contains("parent_function") && !j.at("parent_function").is_null())
        f.parent_function = id_from(j.at("parent_function"), "parent_function");
    return f;
}

inline Json form_json(const Form& f) {
    Json j = tobj_json(f.base);
    Json g;
    g["shape_descriptor"] = f.geometry.shape_descriptor;
    if (f.geometry.bounding_dims) {
        const auto& d = *f.geometry.bounding_dims;
        g["bounding_dims"] = Json::array({d[0], d[1], d[2]});
    } else {
        g["bounding_dims"] = nullptr;
    }
    j["geometry"] = g;
    Json m;
    m["name"] = f.material.name;
    m["grade"] = f.material.grade ? Json(*f.material.grade) : Json(nullptr);
    j["material"] = m;
    return j;
}

inline Form form_from(const Json& j) {
    Form f;
    f.base = tobj_from(j);
    const auto& g = j.at("geometry");
    f.geometry.shape_descriptor = g.at("shape_descriptor").get<std::string>();
    if (!g.at("bounding_dims").is_null()) {
        f.geometry.bounding_dims = std::array<double, 3>{g.at("bounding_dims").at(0).get<double>(),
                                                         g.at("bounding_dims").at(1).get<double>(),
                                                         g.at("bounding_dims").at(2).get<double>()};
    }
    const auto& m = j.at("material");
    f.material.name = m.at("name").get<std::string>();
    if (!m.at("grade").is_null()) f.material.grade = m.at("grade").get<std::string>();
    return f;
}

inline Json behavior_json(const Behavior& b) {
    Json j = tobj_json(b.base);
    j["implements_function"] = b.implements_function.str();
    j["causal_model"] = b.causal_model;
    return j;
}

inline Behavior behavior_from(const Json& j) {
    Behavior b;
    b.base = tobj_from(j);
    b.implements_function = id_from(j.at("implements_function"), "implements_function");
    b.causal_model = j.at("causal_model").get<std::string>();
    return b;
}

inline Json constraint_json(const Constraint& c) {
    Json j;
    j["id"] = c.id.str();
    j["target"] = to_string(c.target);
    j["expression"] = c.expression;
    j["violated"] = c.violated;
    return j;
}

inline Constraint constraint_from(const Json& j) {
    Constraint c;
    c.id = id_from(j.at("id"), "constraint id");
    c.target = constraint_target_from(j.at("target").get<std::string>());
    c.expression = j.at("expression").get<std::string>();
    c.violated = j.value("violated", false);
    return c;
}

inline Json relationship_json(const Relationship& r) {
    Json j;
    j["id"] = r.id.str();
    j["kind"] = to_string(r.kind);
    j["members"] = ids_json(r.members);
    if (r.roles) {
        Json p;
        p["first_role"] = r.roles->first_role;
        p["first"] = ids_json(r.roles->first);
        p["second_role"] = r.roles->second_role;
        p["second"] = ids_json(r.roles->second);
        j["roles"] = p;
    } else {
        j["roles"] = nullptr;
    }
    Json cs = Json::array();
    for (const auto& c : r.constraints) cs.push_back(constraint_json(c));
    j["constraints"] = cs;
    return j;
}

inline Relationship relationship_from(const Json& j) {
    Relationship r;
    r.id = id_from(j.at("id"), "relationship id");
    r.kind = rel_kind_from(j.at("kind").get<std::string>());
    r.members = ids_from(j.at("members"), "member");
    if (j.contains("roles") && !j.at("roles").is_null()) {
        const auto& p = j.at("roles");
        r.roles = RolePartition{p.at("first_role").get<std::string>(),
                                ids_from(p.at("first"), "role member"),
                                p.at("second_role").get<std::string>(),
                                ids_from(p.at("second"), "role member")};
    }
    if (j.contains("constraints"))
        for (const auto& c : j.at("constraints")) r.constraints.push_back(constraint_from(c));
    return r;
}

inline Json requirement_json(const Requirement& r) {
    Json j;
    j["id"] = r.id.str();
    j["applies_to"] = to_string(r.applies_to);
    j["target"] = r.target.str();
    j["text"] = r.text;
    return j;
}

inline Requirement requirement_from(const Json& j) {
    Requirement r;
    r.id = id_from(j.at("id"), "requirement id");
    r.applies_to = requirement_target_from(j.at("applies_to").get<std::string>());
    r.target = id_from(j.at("target"), "requirement target");
    r.text = j.at("text").get<std::string>();
    return r;
}

inline Json job_view_json(const JobView& v) {
    Json j;
    j["name"] = v.name;
    Json sel = Json::array();
    for (const auto& s : v.selector) {
        Json e;
        e["kind"] = to_string(s.kind);
        if (s.member_attr)
            e["member_attr"] = Json{{"key", s.member_attr->first}, {"value", s.member_attr->second}};
        else
            e["member_attr"] = nullptr;
        sel.push_back(e);
    }
    j["selector"] = sel;
    return j;
}

inline JobView job_view_from(const Json& j) {
    JobView v;
    v.name = j.at("name").get<std::string>();
    for (const auto& e : j.at("selector")) {
        JobViewSelector s;
        s.kind = rel_kind_from(e.at("kind").get<std::string>());
        if (e.contains("member_attr") && !e.at("member_attr").is_null())
            s.member_attr = std::make_pair(e.at("member_attr").at("key").get<std::string>(),
                                           e.at("member_attr").at("value").get<std::string>());
        v.selector.push_back(std::move(s));
    }
    return v;
}

inline Json process_json(const Process& p) {
    Json j;
    j["id"] = p.id.str();
    j["kind"] = to_string(p.kind);
    Json as = Json::array();
    for (const auto& a : p.activities) {
        Json e;
        e["id"] = a.id.str();
        e["name"] = a.name;
        e["objective"] = a.objective;
        Json pre = Json::array(), post = Json::array();
        for (const auto& c : a.pre_conditions) pre.push_back(constraint_json(c));
        for (const auto& c : a.post_conditions) post.push_back(constraint_json(c));
        e["pre_conditions"] = pre;
        e["post_conditions"] = post;
        Json rs = Json::array();
        for (const auto& r : a.resources) rs.push_back(Json{{"kind", to_string(r.kind)},
                                                            {"ref", r.ref}});
        e["resources"] = rs;
        e["inputs"] = ids_json(a.inputs);
        e["outputs"] = ids_json(a.outputs);
        as.push_back(e);
    }
    j["activities"] = as;
    return j;
}

inline Process process_from(const Json& j) {
    Process p;
    p.id = id_from(j.at("id"), "process id");
    p.kind = process_kind_from(j.at("kind").get<std::string>());
    for (const auto& e : j.at("activities")) {
        Activity a;
        a.id = id_from(e.at("id"), "activity id");
        a.name = e.at("name").get<std::string>();
        a.objective = e.at("objective").get<std::string>();
        for (const auto& c : e.at("pre_conditions")) a.pre_conditions.push_back(constraint_from(c));
        for (const auto& c : e.at("post_conditions"))
            a.post_conditions.push_back(constraint_from(c));
        for (const auto& r : e.at("resources"))
            a.resources.push_back(Resource{resource_kind_from(r.at("kind").get<std::string>()),
                                           r.at("ref").get<std::string>()});
        a.inputs = ids_from(e.at("inputs"), "activity input");
        a.outputs = ids_from(e.at("outputs"), "activity output");
        p.activities.push_back(std::move(a));
    }
    return p;
}

inline Json role_json(const Role& r) {
    Json j;
    j["name"] = r.name;
    Json rs = Json::array();
    for (auto right : r.rights) rs.push_back(to_string(right));
    j["rights"] = rs;
    return j;
}

inline Role role_from(const Json& j) {
    Role r;
    r.name = j.at("name").get<std::string>();
    for (const auto& e : j.at("rights")) r.rights.push_back(right_from(e.get<std::string>()));
    return r;
}

inline Json organization_json(const Organization& o) {
    Json j;
    j["id"] = o.id.str();
    j["name"] = o.name;
    Json ts = Json::array();
    for (const auto& t : o.teams) {
        Json e;
        e["name"] = t.name;
        e["objective"] = t.objective;
        e["connectors"] = t.connectors;
        Json ms = Json::array();
        for (const auto& m : t.members)
            ms.push_back(Json{{"user", m.user.str()}, {"role", role_json(m.role)}});
        e["members"] = ms;
        ts.push_back(e);
    }
    j["teams"] = ts;
    return j;
}

inline Organization organization_from(const Json& j) {
    Organization o;
    o.id = id_from(j.at("id"), "organization id");
    o.name = j.at("name").get<std::string>();
    for (const auto& e : j.at("teams")) {
        Team t;
        t.name = e.at("name").get<std::string>();
        t.objective = e.at("objective").get<std::string>();
        for (const auto& c : e.at("connectors")) t.connectors.push_back(c.get<std::string>());
        for (const auto& m : e.at("members"))
            t.members.push_back(
                TeamMember{id_from(m.at("user"), "team member"), role_from(m.at("role"))});
        o.teams.push_back(std::move(t));
    }
    return o;
}

inline Json space_json(const CollaborationSpace& s) {
    Json j;
    j["id"] = s.id.str();
    j["level"] = to_string(s.level);
    Json ts = Json::array();
    for (const auto& t : s.teams) ts.push_back(t.str());
    j["teams"] = ts;
    j["products"] = ids_json(s.products);
    return j;
}

inline CollaborationSpace space_from(const Json& j) {
    CollaborationSpace s;
    s.id = id_from(j.at("id"), "space id");
    s.level = collaboration_level_from(j.at("level").get<std::string>());
    for (const auto& t : j.at("teams")) s.teams.push_back(TeamRef::parse(t.get<std::string>()));
    s.products = ids_from(j.at("products"), "space product");
    return s;
}

inline Json domain_link_json(const ActivityDomainLink& l) {
    Json j;
    j["profile"] = to_string(l.profile);
    j["activity"] = l.activity;
    j["domain"] = l.domain;
    return j;
}

inline ActivityDomainLink domain_link_from(const Json& j) {
    ActivityDomainLink l;
    l.profile = profile_from(j.at("profile").get<std::string>());
    l.activity = j.at("activity").get<std::string>();
    l.domain = j.at("domain").get<std::string>();
    return l;
}

}  // namespace js

// ---------------------------------------------------------------------------
// Structural validation of single values (contextual checks live in Repository)
// ---------------------------------------------------------------------------

inline void validate(const Constraint& c) {
    if (c.expression.empty())
        throw Error(Errc::invalid_spec, "constraint " + c.id.str() + " has empty expression");
}

inline void validate(const Relationship& r) {
    size_t need = (r.kind == RelKind::assembly || r.kind == RelKind::reference) ? 2 : 2;
    if (r.members.size() < need)
        throw Error(Errc::invalid_spec, "relationship " + r.id.str() + " needs >= 2 members");
    if ((r.kind == RelKind::assembly || r.kind == RelKind::reference) && r.members.size() != 2)
        throw Error(Errc::invalid_spec,
                    "relationship " + r.id.str() + " must have exactly 2 members");
    if (r.kind == RelKind::directed_set) {
        if (!r.roles)
            throw Error(Errc::invalid_spec,
                        "directed set " + r.id.str() + " needs a role partition");
        std::vector<EntityId> all = r.roles->first;
        all.insert(all.end(), r.roles->second.begin(), r.roles->second.end());
        std::sort(all.begin(), all.end());
        if (std::adjacent_find(all.begin(), all.end()) != all.end())
            throw Error(Errc::invalid_spec,
                        "directed set " + r.id.str() + " role subsets overlap");
        std::vector<EntityId> members = r.members;
        std::sort(members.begin(), members.end());
        if (all != members)
            throw Error(Errc::invalid_spec,
                        "directed set " + r.id.str() + " roles must cover exactly the members");
    }
    for (const auto& c : r.constraints) validate(c);
}

inline void validate(const Geometry& g) {
    if (g.bounding_dims)
        for (double d : *g.bounding_dims)
            if (!(d > 0)) throw Error(Errc::invalid_spec, "bounding dims must be > 0");
}

inline void validate(const Material& m) {
    if (m.name.empty()) throw Error(Errc::invalid_spec, "material name is empty");
}

inline void validate(const Role& r) {
    if (r.rights.empty()) throw Error(Errc::invalid_spec, "role '" + r.name + "' has no rights");
}

inline void validate(const Team& t) {
    if (t.members.empty())
        throw Error(Errc::invalid_spec, "team '" + t.name + "' has no members");
    for (const auto& m : t.members) validate(m.role);
}

inline void validate(const Organization& o) {
    std::vector<std::string> names;
    for (const auto& t : o.teams) {
        validate(t);
        names.push_back(t.name);
    }
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end())
        throw Error(Errc::duplicate_name, "duplicate team name in " + o.id.str());
}

inline void validate(const TimeInterval& t) {
    if (!parse_utc(t.from) || !parse_utc(t.to) || t.to < t.from)
        throw Error(Errc::invalid_spec, "bad effectivity interval");
}

}  // namespace ppco

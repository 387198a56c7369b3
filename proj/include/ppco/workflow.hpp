#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ppco/viewpoint.hpp"

namespace ppco {

enum class UpdateMode { manual, xml_file };
enum class Verdict { pending, approved, rejected };
enum class UpdateState { open, committed, rejected, cancelled };

namespace detail {
inline constexpr std::array<std::string_view, 2> update_mode_names{"manual", "xml_file"};
inline constexpr std::array<std::string_view, 3> verdict_names{"pending", "approved", "rejected"};
inline constexpr std::array<std::string_view, 4> update_state_names{"open", "committed",
                                                                    "rejected", "cancelled"};
}

inline std::string_view to_string(UpdateMode v) {
    return detail::enum_name(detail::update_mode_names, v);
}
inline UpdateMode update_mode_from(std::string_view s) {
    return detail::enum_value<UpdateMode>(detail::update_mode_names, s, "update mode");
}
inline std::string_view to_string(Verdict v) { return detail::enum_name(detail::verdict_names, v); }
inline Verdict verdict_from(std::string_view s) {
    return detail::enum_value<Verdict>(detail::verdict_names, s, "verdict");
}
inline std::string_view to_string(UpdateState v) {
    return detail::enum_name(detail::update_state_names, v);
}
inline UpdateState update_state_from(std::string_view s) {
    return detail::enum_value<UpdateState>(detail::update_state_names, s, "update state");
}

// A proposed modification: attribute rewrites entered by hand, or a reference
// to an imported XML document.
struct Delta {
    AttrMap sets;
    std::optional<std::string> document_ref;
    bool operator==(const Delta&) const = default;

    Json to_json() const {
        Json j;
        j["sets"] = js::attrs_json(sets);
        j["document_ref"] = document_ref ? Json(*document_ref) : Json(nullptr);
        return j;
    }

    static Delta from_json(const Json& j) {
        Delta d;
        d.sets = js::attrs_from(j.at("sets"));
        if (!j.at("document_ref").is_null()) d.document_ref = j.at("document_ref").get<std::string>();
        return d;
    }

    std::string content_digest() const { return digest(to_json().dump()); }
};

struct Annotation {
    EntityId pending;
    EntityId recipient;
    std::string text;
    std::string sent_at;
    bool operator==(const Annotation&) const = default;
};

struct PendingUpdate {
    EntityId id;
    EntityId submitter;
    EntityId target;
    Delta delta;
    UpdateMode mode = UpdateMode::manual;
    std::vector<EntityId> concerned;                       // sorted, unique
    std::vector<std::pair<EntityId, Verdict>> verdicts;    // same order as concerned
    UpdateState state = UpdateState::open;
    std::string created_at;
    std::vector<Annotation> annotations;
    bool operator==(const PendingUpdate&) const = default;

    Verdict verdict_of(const EntityId& user) const {
        for (const auto& [u, v] : verdicts)
            if (u == user) return v;
        throw Error(Errc::not_concerned, user.str());
    }

    bool all_approved() const {
        for (const auto& [u, v] : verdicts)
            if (v != Verdict::approved) return false;
        return true;
    }

    std::vector<EntityId> outstanding() const {
        std::vector<EntityId> out;
        for (const auto& [u, v] : verdicts)
            if (v == Verdict::pending) out.push_back(u);
        return out;
    }
};

namespace js {

inline Json pending_json(const PendingUpdate& p) {
    Json j;
    j["id"] = p.id.str();
    j["submitter"] = p.submitter.str();
    j["target"] = p.target.str();
    j["delta"] = p.delta.to_json();
    j["mode"] = to_string(p.mode);
    j["concerned"] = ids_json(p.concerned);
    Json vs = Json::array();
    for (const auto& [u, v] : p.verdicts) vs.push_back(Json::array({u.str(), to_string(v)}));
    j["verdicts"] = vs;
    j["state"] = to_string(p.state);
    j["created_at"] = p.created_at;
    Json as = Json::array();
    for (const auto& a : p.annotations)
        as.push_back(Json{{"recipient", a.recipient.str()}, {"text", a.text},
                          {"sent_at", a.sent_at}});
    j["annotations"] = as;
    return j;
}

inline PendingUpdate pending_from(const Json& j) {
    PendingUpdate p;
    p.id = id_from(j.at("id"), "pending id");
    p.submitter = id_from(j.at("submitter"), "submitter");
    p.target = id_from(j.at("target"), "target");
    p.delta = Delta::from_json(j.at("delta"));
    p.mode = update_mode_from(j.at("mode").get<std::string>());
    p.concerned = ids_from(j.at("concerned"), "concerned");
    for (const auto& v : j.at("verdicts"))
        p.verdicts.emplace_back(EntityId::parse(v.at(0).get<std::string>()),
                                verdict_from(v.at(1).get<std::string>()));
    p.state = update_state_from(j.at("state").get<std::string>());
    p.created_at = j.at("created_at").get<std::string>();
    for (const auto& a : j.at("annotations"))
        p.annotations.push_back(Annotation{p.id, EntityId::parse(a.at("recipient").get<std::string>()),
                                           a.at("text").get<std::string>(),
                                           a.at("sent_at").get<std::string>()});
    return p;
}

}  // namespace js

// Temporary-update / annotation / unanimous-approval workflow with the
// information-evolution trace.
class Workflow {
public:
    struct CommitNotice {
        EntityId target;
        std::uint32_t new_revision = 0;
        std::string digest;
    };

    Workflow(Repository& repo, ViewpointEngine& engine) : repo_(repo), engine_(engine) {}

    // Invoked whenever an update commits; the exchange node hooks change
    // notifications in here.
    void on_commit(std::function<void(const PendingUpdate&, const CommitNotice&)> fn) {
        on_commit_ = std::move(fn);
    }

    // Everyone holding a viewpoint on the target or on any of its assembly
    // ancestors.
    std::vector<EntityId> concerned_collaborators(const EntityId& target) const {
        if (!repo_.store().exists(target)) throw Error(Errc::unknown_entity, target.str());
        std::set<EntityId> scope{target};
        for (const auto& a : repo_.assembly_ancestors(target)) scope.insert(a);
        std::set<EntityId> users;
        for (const auto& v : engine_.all_viewpoints())
            if (scope.count(v.product)) users.insert(v.user);
        return {users.begin(), users.end()};
    }

    EntityId submit_update(const EntityId& submitter, const EntityId& target, Delta delta,
                           UpdateMode mode) {
        if (!repo_.is_artifact(target)) throw Error(Errc::unknown_entity, target.str());
        if (!repo_.user_has_right(submitter, target, Right::propose_update))
            throw Error(Errc::no_right,
                        submitter.str() + " cannot propose updates on " + target.str());
        if (auto open = open_update_for(target))
            throw Error(Errc::concurrent_open_update,
                        target.str() + " is locked by open update " + open->str());
        if (mode == UpdateMode::xml_file && !delta.document_ref)
            throw Error(Errc::invalid_spec, "xml_file update needs a document reference");

        PendingUpdate p;
        p.id = repo_.store().mint(target.ns);
        p.submitter = submitter;
        p.target = target;
        p.delta = std::move(delta);
        p.mode = mode;
        std::set<EntityId> concerned{submitter};
        for (const auto& u : concerned_collaborators(target)) concerned.insert(u);
        p.concerned.assign(concerned.begin(), concerned.end());
        for (const auto& u : p.concerned)
            p.verdicts.emplace_back(u, u == submitter ? Verdict::approved : Verdict::pending);
        p.state = UpdateState::open;
        p.created_at = repo_.store().now_str();
        std::string d = p.delta.content_digest();
        for (const auto& u : p.concerned) {
            if (u == submitter) continue;
            p.annotations.push_back(Annotation{
                p.id, u, "update " + p.id.str() + " proposed on " + target.str() + " (" + d + ")",
                p.created_at});
        }

        repo_.store().put(kinds::pending, p.id, js::pending_json(p));
        repo_.store().append_trace(p.id, TraceKind::submitted, submitter, d);
        for (const auto& a : p.annotations)
            repo_.store().append_trace(p.id, TraceKind::annotated, a.recipient, digest(a.text));
        repo_.set_statutory(target, StatutoryState::wait_validation);
        if (p.all_approved()) commit(p);  // degenerate set: submitter alone
        return p.id;
    }

    PendingUpdate pending(const EntityId& id) const {
        auto k = repo_.store().kind_of(id);
        if (!k || *k != kinds::pending) throw Error(Errc::unknown_entity, id.str());
        return js::pending_from(repo_.store().get(id));
    }

    std::vector<EntityId> pending_ids() const { return repo_.store().list(kinds::pending); }

    std::optional<EntityId> open_update_for(const EntityId& target) const {
        for (const auto& id : pending_ids()) {
            PendingUpdate p = pending(id);
            if (p.target == target && p.state == UpdateState::open) return id;
        }
        return std::nullopt;
    }

    UpdateState record_verdict(const EntityId& pending_id, const EntityId& user, Verdict verdict) {
        if (verdict != Verdict::approved && verdict != Verdict::rejected)
            throw Error(Errc::invalid_spec, "verdict must be approved or rejected");
        PendingUpdate p = pending(pending_id);
        if (p.state != UpdateState::open)
            throw Error(Errc::update_closed, pending_id.str() + " is " +
                                                 std::string(to_string(p.state)));
        bool found = false;
        for (auto& [u, v] : p.verdicts) {
            if (u != user) continue;
            found = true;
            if (v != Verdict::pending) throw Error(Errc::already_decided, user.str());
            v = verdict;
        }
        if (!found) throw Error(Errc::not_concerned, user.str());

        repo_.store().append_trace(p.id,
                                   verdict == Verdict::approved ? TraceKind::approved
                                                                : TraceKind::rejected,
                                   user, p.delta.content_digest());
        if (verdict == Verdict::rejected) {
            p.state = UpdateState::rejected;
            repo_.store().put(kinds::pending, p.id, js::pending_json(p));
            repo_.set_statutory(p.target, StatutoryState::rejected);
            return p.state;
        }
        repo_.store().put(kinds::pending, p.id, js::pending_json(p));
        if (p.all_approved()) {
            commit(p);
            return UpdateState::committed;
        }
        return p.state;
    }

    // Escape hatch: the submitter may withdraw an open update. The stored
    // data is left untouched and the target drops back to rejected.
    UpdateState cancel(const EntityId& pending_id, const EntityId& user) {
        PendingUpdate p = pending(pending_id);
        if (p.state != UpdateState::open)
            throw Error(Errc::update_closed, pending_id.str());
        if (user != p.submitter)
            throw Error(Errc::no_right, "only the submitter may cancel " + pending_id.str());
        p.state = UpdateState::cancelled;
        repo_.store().put(kinds::pending, p.id, js::pending_json(p));
        repo_.store().append_trace(p.id, TraceKind::state_changed, user, digest("cancelled"));
        repo_.set_statutory(p.target, StatutoryState::rejected);
        return p.state;
    }

    std::vector<TraceEvent> trace(const EntityId& subject) const {
        return repo_.store().trace(subject);
    }

private:
    void commit(PendingUpdate& p) {
        std::uint32_t new_rev = repo_.commit_revision(p.target, p.delta.sets);
        p.state = UpdateState::committed;
        repo_.store().put(kinds::pending, p.id, js::pending_json(p));
        std::string d = p.delta.content_digest();
        repo_.store().append_trace(p.id, TraceKind::committed, p.submitter,
                                   digest(p.target.str() + "@" + std::to_string(new_rev) + ":" + d));
        repo_.set_statutory(p.target, StatutoryState::update_is_accepted);
        if (on_commit_) on_commit_(p, CommitNotice{p.target, new_rev, d});
    }

    Repository& repo_;
    ViewpointEngine& engine_;
    std::function<void(const PendingUpdate&, const CommitNotice&)> on_commit_;
};

}  // namespace ppco

#pragma once

#include <map>
#include <string>

#include "ppco/message.hpp"
#include "ppco/repository.hpp"
#include "ppco/viewpoint.hpp"
#include "ppco/workflow.hpp"

namespace ppco {

// One store with the operation layers wired on top of it. The CLI and the
// exchange node both run everything through a session.
struct Session {
    Store store;
    Repository repo;
    ViewpointEngine engine;
    Workflow workflow;

    Session(fs::path root, Store::Options store_opt, Repository::Options repo_opt)
        : store(std::move(root), store_opt),
          repo(store, std::move(repo_opt)),
          engine(repo),
          workflow(repo, engine) {}

    explicit Session(fs::path root)
        : Session(std::move(root), Store::Options(), Repository::Options()) {}
};

using FixtureCounts = std::map<std::string, size_t>;

namespace fixture_detail {

// Fixture entries may omit record boilerplate; fill the defaults the store
// schema expects.
inline Json normalized(const Json& e, const char* kind) {
    Json j = e;
    if (!j.contains("kind")) j["kind"] = kind;
    if (!j.contains("statutory")) j["statutory"] = "created";
    if (!j.contains("revision")) j["revision"] = 1;
    if (!j.contains("effectivity")) j["effectivity"] = nullptr;
    if (!j.contains("attributes")) j["attributes"] = Json::array();
    return j;
}

inline EntityId entry_id(const Json& e) { return EntityId::parse(e.at("id").get<std::string>()); }

template <typename LoadFn>
void load_entities(Session& s, const Json& doc, const char* key, FixtureCounts& counts,
                   LoadFn&& fn) {
    if (!doc.contains(key)) return;
    for (const auto& e : doc.at(key)) {
        ++counts[key];
        if (s.store.exists(entry_id(e))) continue;  // idempotent reload
        fn(e);
    }
}

inline void validate_scenario(Session& s, const Json& doc) {
    // Viewpoint activities must be covered by the configured activity/domain
    // links.
    if (doc.contains("viewpoints")) {
        auto links = s.repo.domain_links();
        for (const auto& e : doc.at("viewpoints")) {
            std::string activity = e.at("activity").get<std::string>();
            bool covered = false;
            for (const auto& l : links)
                if (l.activity == activity) covered = true;
            if (!covered)
                throw Error(Errc::fixture_error,
                            "viewpoint activity '" + activity +
                                "' appears in no activity_domain_link");
        }
    }
    // Every form is attached to exactly one artifact through a reference link.
    if (doc.contains("forms")) {
        for (const auto& e : doc.at("forms")) {
            EntityId form_id = entry_id(e);
            size_t owners = 0;
            for (const auto& rel : s.repo.all_relationships())
                if (rel.kind == RelKind::reference && rel.members.size() == 2 &&
                    rel.members[1] == form_id && s.repo.is_artifact(rel.members[0]))
                    ++owners;
            if (owners != 1)
                throw Error(Errc::fixture_error, "form " + form_id.str() + " has " +
                                                     std::to_string(owners) +
                                                     " owning artifacts, expected 1");
        }
    }
    // A behavior and the function it implements must hang off the same artifact.
    if (doc.contains("behaviors")) {
        auto owner_of = [&](const EntityId& id) -> std::optional<EntityId> {
            for (const auto& rel : s.repo.all_relationships())
                if (rel.kind == RelKind::reference && rel.members.size() == 2 &&
                    rel.members[1] == id && s.repo.is_artifact(rel.members[0]))
                    return rel.members[0];
            return std::nullopt;
        };
        for (const auto& e : doc.at("behaviors")) {
            Behavior b = s.repo.behavior(entry_id(e));
            auto bo = owner_of(b.base.id);
            auto fo = owner_of(b.implements_function);
            if (bo && fo && *bo != *fo)
                throw Error(Errc::fixture_error,
                            "behavior " + b.base.id.str() + " and function " +
                                b.implements_function.str() + " belong to different artifacts");
        }
    }
    // Team connectors must resolve to a team or a collaboration space.
    for (const auto& org_id : s.store.list(kinds::organization)) {
        Organization org = s.repo.organization(org_id);
        for (const auto& t : org.teams) {
            for (const auto& c : t.connectors) {
                if (c.find('/') != std::string::npos) {
                    s.repo.resolve_team(TeamRef::parse(c));
                    continue;
                }
                auto id = EntityId::try_parse(c);
                auto kind = id ? s.store.kind_of(*id) : std::nullopt;
                if (!kind || *kind != kinds::space)
                    throw Error(Errc::fixture_error, "team '" + t.name + "' connector '" + c +
                                                         "' resolves to nothing");
            }
        }
    }
}

}  // namespace fixture_detail

// Load one fixture document. Two document shapes are recognized: a scenario
// document (artifacts, relationships, organizations, users, ...) and a
// viewpoint configuration document (families, connections, selectors).
// Loading the same document twice changes nothing.
inline FixtureCounts load_fixture(Session& s, const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(Errc::fixture_error, "cannot open " + path.string());
    Json doc;
    try {
        doc = Json::parse(f);
    } catch (const std::exception& ex) {
        throw Error(Errc::fixture_error, path.string() + ": " + ex.what());
    }

    FixtureCounts counts;
    try {
        if (doc.contains("connections") || doc.contains("families")) {
            ViewpointConfig cfg = ViewpointConfig::from_json(doc);
            s.engine.set_config(cfg);
            counts["families"] = cfg.families.size();
            counts["connections"] = cfg.connections.size();
            counts["selectors"] = cfg.selectors.size();
            return counts;
        }

        using fixture_detail::load_entities;
        using fixture_detail::normalized;

        load_entities(s, doc, "artifacts", counts, [&](const Json& e) {
            s.repo.create_artifact_pinned(js::artifact_from(normalized(e, "artifact")));
        });
        load_entities(s, doc, "functions", counts, [&](const Json& e) {
            s.repo.create_function(js::function_from(normalized(e, "function")));
        });
        load_entities(s, doc, "forms", counts, [&](const Json& e) {
            s.repo.create_form(js::form_from(normalized(e, "form")));
        });
        load_entities(s, doc, "behaviors", counts, [&](const Json& e) {
            s.repo.create_behavior(js::behavior_from(normalized(e, "behavior")));
        });
        load_entities(s, doc, "flows", counts, [&](const Json& e) {
            s.repo.create_flow(js::tobj_from(normalized(e, "flow")));
        });
        load_entities(s, doc, "relationships", counts, [&](const Json& e) {
            Json j = e;
            if (!j.contains("roles")) j["roles"] = nullptr;
            if (!j.contains("constraints")) j["constraints"] = Json::array();
            s.repo.create_relationship(js::relationship_from(j));
        });
        load_entities(s, doc, "requirements", counts, [&](const Json& e) {
            s.repo.create_requirement(js::requirement_from(e));
        });
        load_entities(s, doc, "organizations", counts, [&](const Json& e) {
            s.repo.create_organization(js::organization_from(e));
        });
        load_entities(s, doc, "users", counts, [&](const Json& e) {
            s.engine.register_user_pinned(js::user_from(e));
        });

        if (doc.contains("viewpoints")) {
            for (const auto& e : doc.at("viewpoints")) {
                ++counts["viewpoints"];
                Viewpoint v = js::viewpoint_from([&] {
                    Json j = e;
                    if (!j.contains("competence")) j["competence"] = 1;  // derived on register
                    if (!j.contains("relationship_ref")) j["relationship_ref"] = nullptr;
                    return j;
                }());
                if (s.store.exists(v.record_id())) continue;
                s.engine.register_viewpoint_pinned(v);
            }
        }

        load_entities(s, doc, "spaces", counts, [&](const Json& e) {
            s.repo.create_space(js::space_from(e));
        });
        load_entities(s, doc, "processes", counts, [&](const Json& e) {
            s.repo.create_process(js::process_from(e));
        });

        if (doc.contains("job_views")) {
            for (const auto& e : doc.at("job_views")) {
                ++counts["job_views"];
                JobView v = js::job_view_from(e);
                bool known = false;
                for (const auto& existing : s.repo.job_views())
                    if (existing.name == v.name) known = true;
                if (!known) s.repo.register_job_view(v);
            }
        }
        if (doc.contains("activity_domain_links")) {
            std::vector<ActivityDomainLink> links;
            for (const auto& e : doc.at("activity_domain_links")) {
                ++counts["activity_domain_links"];
                links.push_back(js::domain_link_from(e));
            }
            s.repo.set_domain_links(links);
        }

        fixture_detail::validate_scenario(s, doc);
    } catch (const Error& err) {
        if (err.code() == Errc::fixture_error) throw;
        throw Error(Errc::fixture_error, path.string() + ": " + err.what());
    }
    return counts;
}

}  // namespace ppco

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ppco/session.hpp"
#include "test_util.hpp"

using namespace ppco;
using test::TempDir;

namespace {

const EntityId kPiston{"demo", 381009};
const EntityId kGeorges{"demo", 18936};

// The two batch lists of the worked example, frozen.
const std::vector<BatchLevel> kShapeList{
    {"Artifact", 1},    {"Function", 2},     {"Behavior", 2}, {"Flows", 2},
    {"Geometry-Form", 1}, {"Sub-Artifact", 2}, {"Assembly", 2}, {"Constraints", 1},
    {"Requirements", 2},  {"Group", 1}};

const std::vector<BatchLevel> kMechanicalList{
    {"Mechanic", 1},    {"Artifact", 2},      {"Function", 2},     {"Behavior", 2},
    {"Flows", 3},       {"Geometry-Form", 2}, {"Sub-Artifact", 3}, {"Assembly", 3},
    {"Constraints", 1}, {"Requirements", 3},  {"Group", 1},        {"Thermal", 2},
    {"Material", 2},    {"Manufacturing", 2}};

// Independently computed min-merge of the two lists (accumulated order, then
// new batches in incoming order).
const std::vector<BatchLevel> kMergedList{
    {"Artifact", 1},    {"Function", 2},      {"Behavior", 2},     {"Flows", 2},
    {"Geometry-Form", 1}, {"Sub-Artifact", 2}, {"Assembly", 2},    {"Constraints", 1},
    {"Requirements", 2},  {"Group", 1},        {"Mechanic", 1},    {"Thermal", 2},
    {"Material", 2},      {"Manufacturing", 2}};

std::vector<BatchLevel> strip(const std::vector<Connection>& conns) {
    std::vector<BatchLevel> out;
    for (const auto& c : conns) out.push_back(BatchLevel{c.batch, c.level});
    return out;
}

// Brute-force oracle: min level per batch name over any number of lists.
std::map<std::string, int> min_oracle(const std::vector<std::vector<BatchLevel>>& lists) {
    std::map<std::string, int> out;
    for (const auto& l : lists)
        for (const auto& b : l) {
            auto it = out.find(b.batch);
            if (it == out.end() || b.level < it->second) out[b.batch] = b.level;
        }
    return out;
}

std::map<std::string, int> as_map(const std::vector<BatchLevel>& l) {
    std::map<std::string, int> out;
    for (const auto& b : l) out[b.batch] = b.level;
    return out;
}

}  // namespace

TEST_CASE("user registration enforces the single level-3 rule") {
    TempDir dir;
    auto s = test::piston_session(dir);

    EntityId ok = s->engine.register_user("Lena", Situation::Engineer,
                                          {{"Thermal", 3}, {"Mechanic", 2}});
    CHECK(s->engine.user(ok).name == "Lena");

    try {
        s->engine.register_user("TwoThrees", Situation::Engineer,
                                {{"Geometry", 3}, {"Mechanic", 3}});
        FAIL("expected CompetenceRuleViolated");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::competence_rule_violated);
    }
    try {
        s->engine.register_user("NoThree", Situation::Engineer, {{"Geometry", 2}});
        FAIL("expected CompetenceRuleViolated");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::competence_rule_violated);
    }
    try {
        s->engine.register_user("BadLevel", Situation::Engineer, {{"Geometry", 4}});
        FAIL("expected InvalidLevel");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::invalid_level);
    }
    try {
        s->engine.register_user("None", Situation::Engineer, {});
        FAIL("expected CompetenceRuleViolated");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::competence_rule_violated);
    }
}

TEST_CASE("piston fixture pins Georges and his two viewpoints") {
    TempDir dir;
    auto s = test::piston_session(dir);
    User georges = s->engine.user(kGeorges);
    CHECK(georges.name == "Georges");
    CHECK(georges.situation == Situation::Designer);

    Viewpoint vp9 = s->engine.viewpoint(9);
    CHECK(vp9.activity == "Geometry");
    CHECK(vp9.focus == "Shape");
    CHECK(vp9.competence == 3);
    CHECK_FALSE(vp9.relationship_ref);

    Viewpoint vp8 = s->engine.viewpoint(8);
    CHECK(vp8.activity == "Mechanic");
    CHECK(vp8.focus == "Mechanical");
    CHECK(vp8.competence == 2);
    CHECK(vp8.relationship_ref == std::optional<std::uint64_t>(9));
}

TEST_CASE("viewpoint registration wires the relationship ref in both orders") {
    TempDir dir;
    auto s = test::piston_session(dir);
    EntityId rod = s->repo.create_artifact(test::artifact_spec("Rod"));

    SECTION("level-3 viewpoint registered first") {
        std::uint64_t first = s->engine.register_viewpoint(kGeorges, "Design", "Geometry",
                                                           "Shape", rod);
        std::uint64_t second = s->engine.register_viewpoint(kGeorges, "Design", "Mechanic",
                                                            "Mechanical", rod);
        CHECK(s->engine.viewpoint(second).relationship_ref == std::optional(first));
        CHECK_FALSE(s->engine.viewpoint(first).relationship_ref);
    }
    SECTION("level-3 viewpoint registered last rewires the earlier one") {
        std::uint64_t low = s->engine.register_viewpoint(kGeorges, "Design", "Mechanic",
                                                         "Mechanical", rod);
        CHECK_FALSE(s->engine.viewpoint(low).relationship_ref);
        std::uint64_t high = s->engine.register_viewpoint(kGeorges, "Design", "Geometry",
                                                          "Shape", rod);
        CHECK(s->engine.viewpoint(low).relationship_ref == std::optional(high));
    }
}

TEST_CASE("viewpoint registration rejects bad input") {
    TempDir dir;
    auto s = test::piston_session(dir);
    try {
        s->engine.register_viewpoint(kGeorges, "Design", "Geometry", "Shape", kPiston);
        FAIL("expected DuplicateViewpoint");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::duplicate_viewpoint);
    }
    try {
        s->engine.register_viewpoint(kGeorges, "Design", "Thermal", "Heat", kPiston);
        FAIL("expected UnknownActivity");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unknown_activity);
    }
    try {
        s->engine.register_viewpoint(EntityId{"demo", 1}, "Design", "Geometry", "Shape", kPiston);
        FAIL("expected UnknownUser");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unknown_user);
    }
    try {
        s->engine.register_viewpoint(kGeorges, "Design", "Geometry", "Shape",
                                     EntityId{"demo", 555555});
        FAIL("expected UnknownProduct");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unknown_product);
    }
}

TEST_CASE("restitution lists all viewpoints of a user by VP#") {
    TempDir dir;
    auto s = test::piston_session(dir);
    auto vps = s->engine.restitution_list_viewpoint(kGeorges);
    REQUIRE(vps.size() == 2);
    CHECK(vps[0].vp == 8);
    CHECK(vps[1].vp == 9);

    EntityId lonely = s->engine.register_user("Lonely", Situation::Client, {{"Geometry", 3}});
    CHECK(s->engine.restitution_list_viewpoint(lonely).empty());
    CHECK_THROWS_AS(s->engine.restitution_list_viewpoint(EntityId{"demo", 31337}), Error);
}

TEST_CASE("artifact filter keeps exact product matches only") {
    TempDir dir;
    auto s = test::piston_session(dir);
    auto vps = s->engine.restitution_list_viewpoint(kGeorges);
    CHECK(ViewpointEngine::filtering_list_vp_artifact(vps, kPiston).size() == 2);
    CHECK(ViewpointEngine::filtering_list_vp_artifact(vps, EntityId{"demo", 381010}).empty());
    CHECK(ViewpointEngine::filtering_list_vp_artifact({}, kPiston).empty());
}

TEST_CASE("classification orders by descending competence, ties by VP#") {
    Viewpoint a;
    a.vp = 4;
    a.competence = 2;
    a.product = kPiston;
    Viewpoint b = a;
    b.vp = 2;
    Viewpoint c = a;
    c.vp = 9;
    c.competence = 3;

    auto sorted = ViewpointEngine::classification_vp({a, b, c});
    REQUIRE(sorted.size() == 3);
    CHECK(sorted[0].vp == 9);
    CHECK(sorted[1].vp == 2);  // stable tie-break: ascending VP#
    CHECK(sorted[2].vp == 4);

    CHECK(ViewpointEngine::classification_vp({a}).size() == 1);

    Viewpoint other = a;
    other.product = EntityId{"demo", 381010};
    try {
        ViewpointEngine::classification_vp({a, other});
        FAIL("expected MixedProducts");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::mixed_products);
    }
}

TEST_CASE("configured connection lists match the worked example") {
    TempDir dir;
    auto s = test::piston_session(dir);
    CHECK(s->engine.restitution_list_connexion_level(s->engine.viewpoint(9)) == kShapeList);
    CHECK(s->engine.restitution_list_connexion_level(s->engine.viewpoint(8)) == kMechanicalList);

    Viewpoint stranger;
    stranger.activity = "Accounting";
    stranger.focus = "Costs";
    try {
        s->engine.restitution_list_connexion_level(stranger);
        FAIL("expected NoConnectionConfigured");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::no_connection_configured);
    }
}

TEST_CASE("merge keeps accumulated order and takes minimum levels") {
    CHECK(ViewpointEngine::optimize_list_connexion_level({}, kShapeList) == kShapeList);
    CHECK(ViewpointEngine::optimize_list_connexion_level(kShapeList, kShapeList) == kShapeList);
    CHECK(ViewpointEngine::optimize_list_connexion_level(kShapeList, kMechanicalList) ==
          kMergedList);
}

TEST_CASE("merge algebra: commutative, associative, idempotent, empty identity") {
    std::mt19937 rng(20250301);
    std::uniform_int_distribution<int> level(1, 3);
    std::uniform_int_distribution<int> count(0, 12);
    auto random_list = [&] {
        std::vector<std::string> universe;
        for (int i = 0; i < 20; ++i) universe.push_back("b" + std::to_string(i));
        std::shuffle(universe.begin(), universe.end(), rng);
        std::vector<BatchLevel> out;
        int n = count(rng);
        for (int i = 0; i < n; ++i) out.push_back(BatchLevel{universe[static_cast<size_t>(i)],
                                                             level(rng)});
        return out;
    };
    auto merge = [](const std::vector<BatchLevel>& a, const std::vector<BatchLevel>& b) {
        return ViewpointEngine::optimize_list_connexion_level(a, b);
    };

    for (int iter = 0; iter < 300; ++iter) {
        auto a = random_list(), b = random_list(), c = random_list();
        CHECK(as_map(merge(a, b)) == as_map(merge(b, a)));
        CHECK(as_map(merge(merge(a, b), c)) == as_map(merge(a, merge(b, c))));
        CHECK(merge(a, a) == a);
        CHECK(merge({}, a) == a);
        CHECK(merge(a, {}) == a);
        CHECK(as_map(merge(a, b)) == min_oracle({a, b}));
        // merged level never exceeds any contributor's level
        for (const auto& m : merge(a, b)) {
            for (const auto& x : a)
                if (x.batch == m.batch) CHECK(m.level <= x.level);
            for (const auto& x : b)
                if (x.batch == m.batch) CHECK(m.level <= x.level);
        }
    }
}

TEST_CASE("full pipeline reproduces the worked example") {
    TempDir dir;
    auto s = test::piston_session(dir);
    FilterResult r = s->engine.filtering_info_artifact(kPiston, kGeorges);

    CHECK(r.user == kGeorges);
    CHECK(r.product == kPiston);
    CHECK(r.viewpoint_order == std::vector<std::uint64_t>{9, 8});
    CHECK(strip(r.connections) == kMergedList);

    // contributors: every batch of the shape list is contributed by 9; the
    // mechanical list adds 8; mechanic-only batches carry just 8.
    for (const auto& c : r.connections) {
        if (c.batch == "Mechanic" || c.batch == "Thermal" || c.batch == "Material" ||
            c.batch == "Manufacturing")
            CHECK(c.contributors == std::vector<std::uint64_t>{8});
        else
            CHECK(c.contributors == std::vector<std::uint64_t>{9, 8});
        int min_level = 4;
        for (auto vp : c.contributors) {
            for (const auto& b :
                 s->engine.restitution_list_connexion_level(s->engine.viewpoint(vp)))
                if (b.batch == c.batch) min_level = std::min(min_level, b.level);
        }
        CHECK(c.level == min_level);
    }
}

TEST_CASE("pipeline edge cases") {
    TempDir dir;
    auto s = test::piston_session(dir);

    // single viewpoint: configured list verbatim
    FilterResult amira = s->engine.filtering_info_artifact(kPiston, EntityId{"demo", 18937});
    CHECK(amira.viewpoint_order == std::vector<std::uint64_t>{10});
    CHECK(strip(amira.connections) == kMechanicalList);

    EntityId rod = s->repo.create_artifact(test::artifact_spec("Rod"));
    try {
        s->engine.filtering_info_artifact(rod, kGeorges);
        FAIL("expected NoViewpointOnProduct");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::no_viewpoint_on_product);
    }
    CHECK_THROWS_AS(s->engine.filtering_info_artifact(kPiston, EntityId{"demo", 1}), Error);
    CHECK_THROWS_AS(s->engine.filtering_info_artifact(EntityId{"demo", 1}, kGeorges), Error);
}

TEST_CASE("pipeline equals a randomized whole-pipeline oracle") {
    TempDir dir;
    Repository::Options ropt;
    ropt.default_ns = "demo";
    Session s(dir / "store", Store::Options(), ropt);
    s.store.set_clock([] { return test::fixed_time(); });

    std::mt19937 rng(99);
    std::uniform_int_distribution<int> level12(1, 2);
    std::uniform_int_distribution<int> lvl(1, 3);
    std::uniform_int_distribution<int> vps_count(1, 5);
    std::uniform_int_distribution<int> batch_count(1, 8);

    for (int iter = 0; iter < 60; ++iter) {
        std::string tag = std::to_string(iter);
        EntityId product = s.repo.create_artifact(test::artifact_spec("p" + tag));

        int nvp = vps_count(rng);
        ViewpointConfig cfg;
        Family fam;
        fam.name = "universe";
        for (int i = 0; i < 20; ++i) fam.batches.push_back("b" + std::to_string(i));
        cfg.families.push_back(fam);

        std::vector<std::pair<std::string, int>> competences;
        std::vector<std::vector<BatchLevel>> lists;
        for (int v = 0; v < nvp; ++v) {
            std::string activity = "act" + tag + "_" + std::to_string(v);
            competences.emplace_back(activity, v == 0 ? 3 : level12(rng));
            std::vector<std::string> names = fam.batches;
            std::shuffle(names.begin(), names.end(), rng);
            ConnectionEntry entry;
            entry.activity = activity;
            entry.focus = "f";
            int nb = batch_count(rng);
            for (int b = 0; b < nb; ++b)
                entry.batches.push_back(BatchLevel{names[static_cast<size_t>(b)], lvl(rng)});
            lists.push_back(entry.batches);
            cfg.connections.push_back(std::move(entry));
        }
        s.engine.set_config(cfg);
        EntityId user = s.engine.register_user("u" + tag, Situation::Engineer, competences);
        for (int v = 0; v < nvp; ++v)
            s.engine.register_viewpoint(user, "dom", competences[static_cast<size_t>(v)].first,
                                        "f", product);

        FilterResult r = s.engine.filtering_info_artifact(product, user);
        CHECK(as_map(strip(r.connections)) == min_oracle(lists));
        CHECK(r.viewpoint_order.size() == static_cast<size_t>(nvp));
        // determinism: a second run yields the identical result
        CHECK(s.engine.filtering_info_artifact(product, user) == r);
    }
}

TEST_CASE("materialize resolves batches through the configured selectors") {
    TempDir dir;
    auto s = test::piston_session(dir);
    FilterResult r = s->engine.filtering_info_artifact(kPiston, kGeorges);

    Payload all = s->engine.materialize(r, 3);
    CHECK(all.size() == 14);

    Payload important = s->engine.materialize(r, 1);
    std::set<std::string> batches;
    for (const auto& f : important) batches.insert(f.batch);
    CHECK(batches == std::set<std::string>{"Artifact", "Geometry-Form", "Constraints", "Group",
                                           "Mechanic"});

    try {
        s->engine.materialize(r, 0);
        FAIL("expected InvalidThreshold");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::invalid_threshold);
    }
    CHECK_THROWS_AS(s->engine.materialize(r, 4), Error);

    // payload content spot checks
    for (const auto& f : all) {
        if (f.batch == "Artifact") {
            REQUIRE(f.items.size() == 1);
            CHECK(f.items[0].ref == "demo:381009");
            CHECK(f.items[0].label == "Piston");
        }
        if (f.batch == "Sub-Artifact") CHECK(f.items.size() == 4);
        if (f.batch == "Assembly") CHECK(f.items.size() == 4);
        if (f.batch == "Mechanic") CHECK(f.items.size() == 2);
        if (f.batch == "Group") CHECK(f.items.size() == 3);
        if (f.batch == "Geometry-Form") {
            REQUIRE(f.items.size() == 1);
            CHECK(f.items[0].ref == "demo:381040");
        }
    }

    // a batch without a selector
    ViewpointConfig cfg = s->engine.config();
    cfg.selectors.erase("Group");
    s->engine.set_config(cfg);
    try {
        s->engine.materialize(r, 3);
        FAIL("expected UnknownBatchSelector");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unknown_batch_selector);
    }
}

TEST_CASE("config validation rejects alien batches and bad levels") {
    ViewpointConfig cfg;
    cfg.families.push_back(Family{"f", {"A"}});
    cfg.connections.push_back(ConnectionEntry{"act", "focus", {{"A", 1}, {"B", 2}}});
    CHECK_THROWS_AS(cfg.validate(), Error);

    cfg.connections[0].batches = {{"A", 0}};
    CHECK_THROWS_AS(cfg.validate(), Error);

    cfg.connections[0].batches = {{"A", 1}, {"A", 2}};
    CHECK_THROWS_AS(cfg.validate(), Error);

    cfg.connections[0].batches = {{"A", 1}};
    CHECK_NOTHROW(cfg.validate());
}

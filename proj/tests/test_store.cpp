#include <catch2/catch_amalgamated.hpp>

#include "ppco/repository.hpp"
#include "ppco/session.hpp"
#include "test_util.hpp"

using namespace ppco;
using test::TempDir;

TEST_CASE("put then get returns the same record") {
    TempDir dir;
    Store store(dir / "store");
    EntityId id{"demo", 42};
    Json body{{"id", "demo:42"}, {"value", "x"}};
    CHECK(store.put("user", id, body) == 1);
    CHECK(store.get(id) == body);
    CHECK(store.exists(id));
    CHECK(store.kind_of(id) == std::string("user"));
    CHECK(store.list("user") == std::vector<EntityId>{id});
}

TEST_CASE("revisions are write-once and historically stable") {
    TempDir dir;
    Store store(dir / "store");
    EntityId id{"demo", 7};
    store.put("artifact", id, Json{{"statutory", "created"}, {"n", 1}});
    std::string original = store.get_raw(id, 1);
    store.put("artifact", id, Json{{"statutory", "created"}, {"n", 2}});
    store.put("artifact", id, Json{{"statutory", "created"}, {"n", 3}});
    CHECK(store.latest_revision(id) == 3);
    CHECK(store.get_raw(id, 1) == original);
    CHECK(store.get(id, 1).at("n") == 1);
    CHECK_THROWS_AS(store.get(id, 4), Error);
    CHECK_THROWS_AS(store.get(EntityId{"demo", 8}), Error);

    try {
        store.get(id, 9);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unknown_revision);
    }
}

TEST_CASE("statutory sidecar overlays the latest view only") {
    TempDir dir;
    Store store(dir / "store");
    EntityId id{"demo", 9};
    store.put("artifact", id, Json{{"statutory", "created"}, {"n", 1}});
    store.write_statutory(id, StatutoryState::wait_validation);
    CHECK(store.get(id).at("statutory") == "wait_validation");
    CHECK(store.get(id, 1).at("statutory") == "created");  // committed record untouched
    CHECK(store.statutory(id) == StatutoryState::wait_validation);
}

TEST_CASE("kill-and-reload replays to the same index") {
    TempDir dir;
    std::map<EntityId, std::pair<std::string, std::uint32_t>> before;
    std::uint64_t seq_before = 0;
    {
        Store store(dir / "store");
        store.put("artifact", EntityId{"demo", 1}, Json{{"statutory", "created"}});
        store.put("artifact", EntityId{"demo", 1}, Json{{"statutory", "created"}});
        store.put("user", EntityId{"demo", 2}, Json{{"name", "Georges"}});
        store.append_trace(EntityId{"demo", 1}, TraceKind::created, std::nullopt, "d1");
        store.append_trace(EntityId{"demo", 2}, TraceKind::created, std::nullopt, "d2");
        before = store.index_view();
        seq_before = store.trace_seq();
        // no clean shutdown beyond scope exit; files are already durable
    }
    Store reloaded(dir / "store");
    CHECK(reloaded.index_view() == before);
    CHECK(reloaded.trace_seq() == seq_before);
    CHECK(reloaded.trace_all().size() == 2);
}

TEST_CASE("trace log is append-only with gapless sequence") {
    TempDir dir;
    Store store(dir / "store");
    store.set_clock([] { return test::fixed_time(); });
    EntityId a{"demo", 1};
    store.put("artifact", a, Json{{"statutory", "created"}});
    for (int i = 0; i < 10; ++i)
        store.append_trace(a, TraceKind::state_changed, std::nullopt, std::to_string(i));
    auto events = store.trace_all();
    REQUIRE(events.size() == 10);
    for (size_t i = 0; i < events.size(); ++i) CHECK(events[i].seq == i + 1);
    CHECK(store.trace(a).size() == 10);
    CHECK(store.trace(EntityId{"demo", 99}).empty());
}

TEST_CASE("second writer is locked out, readers are not") {
    TempDir dir;
    Store store(dir / "store");
    try {
        Store second(dir / "store");
        FAIL("expected LockHeld");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::lock_held);
    }
    Store::Options ro;
    ro.mode = Store::Mode::read_only;
    CHECK_NOTHROW(Store(dir / "store", ro));
}

TEST_CASE("stale locks from dead processes are reclaimed") {
    TempDir dir;
    fs::create_directories(dir / "store");
    {
        std::ofstream lock(dir.path / "store" / ".lock");
        lock << "999999999\n";  // no such pid
    }
    CHECK_NOTHROW(Store(dir / "store"));
}

TEST_CASE("snapshot dumps the live index") {
    TempDir dir;
    Store store(dir / "store");
    store.set_clock([] { return test::fixed_time(); });
    store.put("artifact", EntityId{"demo", 1}, Json{{"statutory", "created"}});
    fs::path snap = store.snapshot();
    CHECK(fs::exists(snap));
    Json j = Json::parse(std::ifstream(snap));
    CHECK(j.at("entities").contains("demo:1"));
}

TEST_CASE("minting skips every existing number in the namespace") {
    TempDir dir;
    Store store(dir / "store");
    store.put("artifact", EntityId{"demo", 381009}, Json{{"statutory", "created"}});
    store.put("user", EntityId{"demo", 18936}, Json{{"name", "Georges"}});
    CHECK(store.mint("demo") == EntityId{"demo", 381010});
    CHECK(store.mint("acme") == EntityId{"acme", 1});
}

TEST_CASE("fixture loading is idempotent") {
    TempDir dir;
    Repository::Options ropt;
    ropt.default_ns = "demo";
    Session s(dir / "store", Store::Options(), ropt);
    s.store.set_clock([] { return test::fixed_time(); });

    FixtureCounts first = load_fixture(s, test::fixture_dir() / "piston.json");
    FixtureCounts cfg_first = load_fixture(s, test::fixture_dir() / "viewpoints.json");
    auto index_first = s.store.index_view();
    auto seq_first = s.store.trace_seq();

    FixtureCounts second = load_fixture(s, test::fixture_dir() / "piston.json");
    FixtureCounts cfg_second = load_fixture(s, test::fixture_dir() / "viewpoints.json");

    CHECK(first == second);
    CHECK(cfg_first == cfg_second);
    CHECK(s.store.index_view() == index_first);
    CHECK(s.store.trace_seq() == seq_first);
    CHECK(first.at("artifacts") == 5);
    CHECK(first.at("viewpoints") == 4);
    CHECK(first.at("users") == 3);
}

TEST_CASE("store layout matches the documented directory scheme") {
    TempDir dir;
    {
        Repository::Options ropt;
        ropt.default_ns = "demo";
        Session s(dir / "store", Store::Options(), ropt);
        load_fixture(s, test::fixture_dir() / "piston.json");
    }
    CHECK(fs::exists(dir.path / "store" / "artifact" / "demo_381009" / "1.json"));
    CHECK(fs::exists(dir.path / "store" / "user" / "demo_18936" / "1.json"));
    CHECK(fs::exists(dir.path / "store" / "viewpoint" / "vp_9" / "1.json"));
    CHECK(fs::exists(dir.path / "store" / "trace.log"));
}

TEST_CASE("fixture errors are reported as FixtureError") {
    TempDir dir;
    Session s(dir / "store");
    try {
        load_fixture(s, test::fixture_dir() / "no_such_file.json");
        FAIL("expected FixtureError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::fixture_error);
    }

    fs::path bad = dir / "bad.json";
    std::ofstream(bad) << "{ not json";
    try {
        load_fixture(s, bad);
        FAIL("expected FixtureError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::fixture_error);
    }
}

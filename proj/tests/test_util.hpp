#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "ppco/session.hpp"

namespace ppco::test {

inline std::filesystem::path fixture_dir() { return PPCO_FIXTURE_DIR; }
inline std::filesystem::path docs_dir() { return PPCO_DOCS_DIR; }

struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("ppco_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }

    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }

    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& sub) const { return path / sub; }
};

inline Timestamp fixed_time() { return *parse_utc("2025-03-01T09:30:00Z"); }

// Session over a fresh store with the canonical piston corpus loaded.
inline std::unique_ptr<Session> piston_session(const TempDir& dir) {
    Repository::Options ropt;
    ropt.default_ns = "demo";
    auto s = std::make_unique<Session>(dir / "store", Store::Options(), ropt);
    s->store.set_clock([] { return fixed_time(); });
    load_fixture(*s, fixture_dir() / "piston.json");
    load_fixture(*s, fixture_dir() / "viewpoints.json");
    return s;
}

// Minimal artifact spec used all over the unit tests.
inline Artifact artifact_spec(const std::string& name,
                              Composition comp = Composition::semi_finished) {
    Artifact a;
    a.base.name = name;
    a.abstraction = Abstraction::physical;
    a.composition = comp;
    return a;
}

}  // namespace ppco::test

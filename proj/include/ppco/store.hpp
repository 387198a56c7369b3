#pragma once

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <sys/types.h>
#include <unistd.h>

#include "ppco/model.hpp"

namespace ppco {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Trace events
// ---------------------------------------------------------------------------

enum class TraceKind {
    created, submitted, annotated, approved, rejected, committed, state_changed, message_sent,
    message_received
};

namespace detail {
inline constexpr std::array<std::string_view, 9> trace_kind_names{
    "created",       "submitted",    "annotated", "approved", "rejected",
    "committed",     "state_changed", "message_sent", "message_received"};
}

inline std::string_view to_string(TraceKind v) {
    return detail::enum_name(detail::trace_kind_names, v);
}
inline TraceKind trace_kind_from(std::string_view s) {
    return detail::enum_value<TraceKind>(detail::trace_kind_names, s, "trace kind");
}

struct TraceEvent {
    std::uint64_t seq = 0;
    EntityId subject;
    TraceKind kind = TraceKind::created;
    std::optional<EntityId> actor;
    std::string payload_digest;
    std::string at;  // UTC ISO-8601 seconds
    bool operator==(const TraceEvent&) const = default;

    Json to_json() const {
        Json j;
        j["seq"] = seq;
        j["subject"] = subject.str();
        j["kind"] = to_string(kind);
        j["actor"] = actor ? Json(actor->str()) : Json(nullptr);
        j["payload_digest"] = payload_digest;
        j["at"] = at;
        return j;
    }

    static TraceEvent from_json(const Json& j) {
        TraceEvent e;
        e.seq = j.at("seq").get<std::uint64_t>();
        e.subject = EntityId::parse(j.at("subject").get<std::string>());
        e.kind = trace_kind_from(j.at("kind").get<std::string>());
        if (!j.at("actor").is_null()) e.actor = EntityId::parse(j.at("actor").get<std::string>());
        e.payload_digest = j.at("payload_digest").get<std::string>();
        e.at = j.at("at").get<std::string>();
        return e;
    }
};

// ---------------------------------------------------------------------------
// Store: file-per-entity-revision repository plus an append-only trace log.
//
// Layout under the root directory:
//   <kind>/<ns>_<num>/<rev>.json   immutable, write-once revision records
//   <kind>/<ns>_<num>/state.json   mutable current statutory state (sidecar)
//   config/<name>.json             named configuration documents
//   trace.log                      NDJSON trace events, gapless seq
//   snapshots/<seq>.json           on-demand index snapshots
//   .lock                          single-writer lock file (holds the pid)
// ---------------------------------------------------------------------------

class Store {
public:
    enum class Mode { read_write, read_only };

    struct Options {
        Mode mode = Mode::read_write;
        bool name_unique = false;  // create_artifact rejects duplicate names when set
    };

    explicit Store(fs::path root) : Store(std::move(root), Options()) {}

    Store(fs::path root, Options opt) : root_(std::move(root)), opt_(opt) {
        fs::create_directories(root_);
        if (opt_.mode == Mode::read_write) acquire_lock();
        reload();
    }

    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    ~Store() { release_lock(); }

    const fs::path& root() const { return root_; }
    const Options& options() const { return opt_; }

    void set_clock(ClockFn clock) { clock_ = std::move(clock); }
    Timestamp now() const { return clock_ ? clock_() : system_now(); }
    std::string now_str() const { return format_utc(now()); }

    // -- records ------------------------------------------------------------

    std::uint32_t put(const std::string& kind, const EntityId& id, const Json& body) {
        std::scoped_lock lk(mu_);
        require_writable();
        auto it = index_.find(id);
        if (it != index_.end() && it->second.kind != kind)
            throw Error(Errc::invalid_spec,
                        id.str() + " already stored with kind '" + it->second.kind + "'");
        std::uint32_t rev = (it == index_.end()) ? 1 : it->second.latest + 1;
        fs::path dir = root_ / kind / id.dir_key();
        fs::create_directories(dir);
        fs::path file = dir / (std::to_string(rev) + ".json");
        if (fs::exists(file))
            throw Error(Errc::internal, "revision file already exists: " + file.string());
        write_atomic(file, body.dump());
        index_[id] = Entry{kind, rev};
        return rev;
    }

    bool exists(const EntityId& id) const {
        std::scoped_lock lk(mu_);
        return index_.count(id) > 0;
    }

    std::optional<std::string> kind_of(const EntityId& id) const {
        std::scoped_lock lk(mu_);
        auto it = index_.find(id);
        if (it == index_.end()) return std::nullopt;
        return it->second.kind;
    }

    std::uint32_t latest_revision(const EntityId& id) const {
        std::scoped_lock lk(mu_);
        return entry(id).latest;
    }

    // Raw bytes of one committed revision, exactly as persisted.
    std::string get_raw(const EntityId& id, std::uint32_t rev) const {
        std::scoped_lock lk(mu_);
        const Entry& e = entry(id);
        if (rev == 0 || rev > e.latest)
            throw Error(Errc::unknown_revision, id.str() + " revision " + std::to_string(rev));
        return read_file(root_ / e.kind / id.dir_key() / (std::to_string(rev) + ".json"));
    }

    // Latest view: the newest revision with the current statutory state
    // overlaid. An explicit revision returns that committed record untouched.
    Json get(const EntityId& id, std::optional<std::uint32_t> rev = std::nullopt) const {
        std::scoped_lock lk(mu_);
        const Entry& e = entry(id);
        std::uint32_t r = rev.value_or(e.latest);
        if (r == 0 || r > e.latest)
            throw Error(Errc::unknown_revision, id.str() + " revision " + std::to_string(r));
        Json j = Json::parse(read_file(root_ / e.kind / id.dir_key() / (std::to_string(r) + ".json")));
        if (!rev && j.contains("statutory")) {
            if (auto st = read_state(e.kind, id)) j["statutory"] = *st;
        }
        return j;
    }

    std::vector<EntityId> list(const std::string& kind) const {
        std::scoped_lock lk(mu_);
        std::vector<EntityId> out;
        for (const auto& [id, e] : index_)
            if (e.kind == kind) out.push_back(id);
        return out;  // map order: sorted by (ns, number)
    }

    // -- statutory sidecar ----------------------------------------------------

    StatutoryState statutory(const EntityId& id) const {
        std::scoped_lock lk(mu_);
        const Entry& e = entry(id);
        if (auto st = read_state(e.kind, id)) return statutory_from(*st);
        Json j = Json::parse(
            read_file(root_ / e.kind / id.dir_key() / (std::to_string(e.latest) + ".json")));
        return statutory_from(j.at("statutory").get<std::string>());
    }

    // Unconditional write of the sidecar; transition legality is the
    // repository's concern.
    void write_statutory(const EntityId& id, StatutoryState st) {
        std::scoped_lock lk(mu_);
        require_writable();
        const Entry& e = entry(id);
        Json j;
        j["statutory"] = to_string(st);
        write_atomic(root_ / e.kind / id.dir_key() / "state.json", j.dump());
    }

    // -- configuration documents ---------------------------------------------

    void put_config(const std::string& name, const Json& doc) {
        std::scoped_lock lk(mu_);
        require_writable();
        fs::create_directories(root_ / "config");
        write_atomic(root_ / "config" / (name + ".json"), doc.dump());
    }

    std::optional<Json> get_config(const std::string& name) const {
        std::scoped_lock lk(mu_);
        fs::path p = root_ / "config" / (name + ".json");
        if (!fs::exists(p)) return std::nullopt;
        return Json::parse(read_file(p));
    }

    // -- trace log -------------------------------------------------------------

    TraceEvent append_trace(const EntityId& subject, TraceKind kind,
                            std::optional<EntityId> actor, std::string payload_digest) {
        std::scoped_lock lk(mu_);
        require_writable();
        TraceEvent e;
        e.seq = ++trace_seq_;
        e.subject = subject;
        e.kind = kind;
        e.actor = std::move(actor);
        e.payload_digest = std::move(payload_digest);
        e.at = now_str();
        std::ofstream f(root_ / "trace.log", std::ios::app | std::ios::binary);
        f << e.to_json().dump() << '\n';
        if (!f) throw Error(Errc::internal, "trace append failed");
        return e;
    }

    std::vector<TraceEvent> trace_all() const {
        std::scoped_lock lk(mu_);
        return read_trace();
    }

    std::vector<TraceEvent> trace(const EntityId& subject) const {
        std::vector<TraceEvent> out;
        for (auto& e : trace_all())
            if (e.subject == subject) out.push_back(std::move(e));
        return out;
    }

    std::uint64_t trace_seq() const {
        std::scoped_lock lk(mu_);
        return trace_seq_;
    }

    // -- id minting --------------------------------------------------------------

    EntityId mint(const std::string& ns) {
        std::scoped_lock lk(mu_);
        require_writable();
        std::uint64_t next = 1;
        for (const auto& [id, e] : index_)
            if (id.ns == ns && id.number >= next) next = id.number + 1;
        return EntityId{ns, next};
    }

    // -- snapshot ---------------------------------------------------------------

    fs::path snapshot() {
        std::scoped_lock lk(mu_);
        require_writable();
        Json j;
        j["at"] = now_str();
        j["trace_seq"] = trace_seq_;
        Json ents = Json::object();
        for (const auto& [id, e] : index_) {
            Json rec;
            rec["kind"] = e.kind;
            rec["latest"] = e.latest;
            if (auto st = read_state(e.kind, id)) rec["statutory"] = *st;
            ents[id.str()] = rec;
        }
        j["entities"] = ents;
        fs::create_directories(root_ / "snapshots");
        fs::path p = root_ / "snapshots" / (std::to_string(trace_seq_) + ".json");
        write_atomic(p, j.dump(2));
        return p;
    }

    // Index as (id -> kind, latest revision) pairs; used by reload-equality tests.
    std::map<EntityId, std::pair<std::string, std::uint32_t>> index_view() const {
        std::scoped_lock lk(mu_);
        std::map<EntityId, std::pair<std::string, std::uint32_t>> out;
        for (const auto& [id, e] : index_) out[id] = {e.kind, e.latest};
        return out;
    }

private:
    struct Entry {
        std::string kind;
        std::uint32_t latest = 0;
    };

    void require_writable() const {
        if (opt_.mode != Mode::read_write)
            throw Error(Errc::internal, "store opened read-only");
    }

    const Entry& entry(const EntityId& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw Error(Errc::unknown_entity, id.str());
        return it->second;
    }

    static std::string read_file(const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        if (!f) throw Error(Errc::internal, "cannot read " + p.string());
        std::ostringstream ss;
        ss << f.rdbuf();
        return std::move(ss).str();
    }

    static void write_atomic(const fs::path& p, const std::string& bytes) {
        fs::path tmp = p;
        tmp += ".tmp";
        {
            std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
            f << bytes;
            if (!f) throw Error(Errc::internal, "cannot write " + tmp.string());
        }
        fs::rename(tmp, p);
    }

    std::optional<std::string> read_state(const std::string& kind, const EntityId& id) const {
        fs::path p = root_ / kind / id.dir_key() / "state.json";
        if (!fs::exists(p)) return std::nullopt;
        return Json::parse(read_file(p)).at("statutory").get<std::string>();
    }

    void reload() {
        index_.clear();
        for (const auto& kind_dir : fs::directory_iterator(root_)) {
            if (!kind_dir.is_directory()) continue;
            std::string kind = kind_dir.path().filename().string();
            if (kind == "config" || kind == "snapshots") continue;
            for (const auto& ent_dir : fs::directory_iterator(kind_dir.path())) {
                if (!ent_dir.is_directory()) continue;
                std::string key = ent_dir.path().filename().string();
                auto us = key.rfind('_');
                if (us == std::string::npos) continue;
                auto id = EntityId::try_parse(key.substr(0, us) + ":" + key.substr(us + 1));
                if (!id) continue;
                std::uint32_t latest = 0;
                for (const auto& f : fs::directory_iterator(ent_dir.path())) {
                    std::string stem = f.path().stem().string();
                    if (f.path().extension() == ".json" && !stem.empty() &&
                        stem.find_first_not_of("0123456789") == std::string::npos)
                        latest = std::max(latest,
                                          static_cast<std::uint32_t>(std::stoul(stem)));
                }
                if (latest > 0) index_[*id] = Entry{kind, latest};
            }
        }
        trace_seq_ = 0;
        for (const auto& e : read_trace()) trace_seq_ = std::max(trace_seq_, e.seq);
    }

    std::vector<TraceEvent> read_trace() const {
        std::vector<TraceEvent> out;
        std::ifstream f(root_ / "trace.log", std::ios::binary);
        if (!f) return out;
        std::string line;
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            out.push_back(TraceEvent::from_json(Json::parse(line)));
        }
        return out;
    }

    void acquire_lock() {
        fs::path lock = root_ / ".lock";
        for (int attempt = 0; attempt < 2; ++attempt) {
            std::FILE* f = std::fopen(lock.c_str(), "wx");
            if (f) {
                std::fprintf(f, "%ld\n", static_cast<long>(::getpid()));
                std::fclose(f);
                lock_held_ = true;
                return;
            }
            // A lock left by a dead process is stale and may be reclaimed.
            std::ifstream in(lock);
            long pid = 0;
            if (in >> pid; pid > 0 && ::kill(static_cast<pid_t>(pid), 0) == -1 && errno == ESRCH) {
                std::error_code ec;
                fs::remove(lock, ec);
                continue;
            }
            throw Error(Errc::lock_held, "store locked by pid " + std::to_string(pid));
        }
        throw Error(Errc::lock_held, "could not acquire store lock");
    }

    void release_lock() {
        if (lock_held_) {
            std::error_code ec;
            fs::remove(root_ / ".lock", ec);
            lock_held_ = false;
        }
    }

    fs::path root_;
    Options opt_;
    ClockFn clock_;
    bool lock_held_ = false;
    std::map<EntityId, Entry> index_;
    std::uint64_t trace_seq_ = 0;
    mutable std::recursive_mutex mu_;
};

}  // namespace ppco

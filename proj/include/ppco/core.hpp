#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ppco {

// Identifier of any stored entity: organization namespace plus a number
// minted inside that namespace. Rendered as "ns:number".
struct EntityId {
    std::string ns;
    std::uint64_t number = 0;

    auto operator<=>(const EntityId&) const = default;

    bool valid() const { return !ns.empty() && number > 0; }

    std::string str() const { return ns + ":" + std::to_string(number); }

    // Directory-safe form used by the store layout.
    std::string dir_key() const { return ns + "_" + std::to_string(number); }

    static std::optional<EntityId> try_parse(std::string_view s) {
        auto colon = s.find(':');
        if (colon == std::string_view::npos || colon == 0 || colon + 1 >= s.size())
            return std::nullopt;
        EntityId id;
        id.ns = std::string(s.substr(0, colon));
        std::uint64_t n = 0;
        for (char c : s.substr(colon + 1)) {
            if (c < '0' || c > '9') return std::nullopt;
            n = n * 10 + static_cast<std::uint64_t>(c - '0');
        }
        if (n == 0) return std::nullopt;
        id.number = n;
        return id;
    }

    static EntityId parse(std::string_view s);
};

enum class Errc {
    invalid_spec,
    invalid_enum,
    invalid_level,
    invalid_threshold,
    invalid_envelope,
    duplicate_name,
    duplicate_viewpoint,
    cycle_detected,
    unknown_entity,
    unknown_revision,
    unknown_view,
    unknown_user,
    unknown_product,
    unknown_activity,
    unknown_peer,
    unknown_batch_selector,
    unknown_message_type,
    illegal_transition,
    competence_rule_violated,
    mixed_products,
    no_connection_configured,
    no_viewpoint_on_product,
    no_right,
    concurrent_open_update,
    not_concerned,
    already_decided,
    update_closed,
    malformed_xml,
    schema_violation,
    transport_closed,
    peer_fault,
    fixture_error,
    bind_error,
    lock_held,
    usage,
    internal,
};

inline const char* to_string(Errc c) {
    switch (c) {
        case Errc::invalid_spec: return "InvalidSpec";
        case Errc::invalid_enum: return "InvalidEnum";
        case Errc::invalid_level: return "InvalidLevel";
        case Errc::invalid_threshold: return "InvalidThreshold";
        case Errc::invalid_envelope: return "InvalidEnvelope";
        case Errc::duplicate_name: return "DuplicateName";
        case Errc::duplicate_viewpoint: return "DuplicateViewpoint";
        case Errc::cycle_detected: return "CycleDetected";
        case Errc::unknown_entity: return "UnknownEntity";
        case Errc::unknown_revision: return "UnknownRevision";
        case Errc::unknown_view: return "UnknownView";
        case Errc::unknown_user: return "UnknownUser";
        case Errc::unknown_product: return "UnknownProduct";
        case Errc::unknown_activity: return "UnknownActivity";
        case Errc::unknown_peer: return "UnknownPeer";
        case Errc::unknown_batch_selector: return "UnknownBatchSelector";
        case Errc::unknown_message_type: return "UnknownMessageType";
        case Errc::illegal_transition: return "IllegalTransition";
        case Errc::competence_rule_violated: return "CompetenceRuleViolated";
        case Errc::mixed_products: return "MixedProducts";
        case Errc::no_connection_configured: return "NoConnectionConfigured";
        case Errc::no_viewpoint_on_product: return "NoViewpointOnProduct";
        case Errc::no_right: return "NoRight";
        case Errc::concurrent_open_update: return "ConcurrentOpenUpdate";
        case Errc::not_concerned: return "NotConcerned";
        case Errc::already_decided: return "AlreadyDecided";
        case Errc::update_closed: return "UpdateClosed";
        case Errc::malformed_xml: return "MalformedXml";
        case Errc::schema_violation: return "SchemaViolation";
        case Errc::transport_closed: return "TransportClosed";
        case Errc::peer_fault: return "PeerFault";
        case Errc::fixture_error: return "FixtureError";
        case Errc::bind_error: return "BindError";
        case Errc::lock_held: return "LockHeld";
        case Errc::usage: return "Usage";
        case Errc::internal: return "Internal";
    }
    return "Internal";
}

inline std::optional<Errc> errc_from_string(std::string_view s) {
    for (int i = 0; i <= static_cast<int>(Errc::internal); ++i) {
        auto c = static_cast<Errc>(i);
        if (s == to_string(c)) return c;
    }
    return std::nullopt;
}

class Error : public std::runtime_error {
public:
    Error(Errc code, std::string message, std::string path = {})
        : std::runtime_error(path.empty()
                                 ? std::string(to_string(code)) + ": " + message
                                 : std::string(to_string(code)) + " at " + path + ": " + message),
          code_(code),
          path_(std::move(path)) {}

    Errc code() const { return code_; }
    const std::string& path() const { return path_; }

private:
    Errc code_;
    std::string path_;
};

inline EntityId EntityId::parse(std::string_view s) {
    auto id = try_parse(s);
    if (!id) throw Error(Errc::invalid_spec, "bad entity id '" + std::string(s) + "'");
    return *id;
}

// FNV-1a 64-bit content digest, rendered as 16 hex chars.
inline std::string digest(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = hex[h & 0xF];
        h >>= 4;
    }
    return out;
}

using Timestamp = std::chrono::system_clock::time_point;
using ClockFn = std::function<Timestamp()>;

// UTC ISO-8601 with second precision, e.g. "2025-03-01T09:30:00Z".
inline std::string format_utc(Timestamp tp) {
    std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

inline std::optional<Timestamp> parse_utc(std::string_view s) {
    if (s.size() != 20 || s[19] != 'Z') return std::nullopt;
    std::tm tm{};
    int y, mo, d, h, mi, se;
    if (std::sscanf(std::string(s).c_str(), "%4d-%2d-%2dT%2d:%2d:%2dZ", &y, &mo, &d, &h, &mi,
                    &se) != 6)
        return std::nullopt;
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || se > 60) return std::nullopt;
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = se;
    std::time_t t = timegm(&tm);
    if (t == static_cast<std::time_t>(-1)) return std::nullopt;
    return std::chrono::system_clock::from_time_t(t);
}

inline Timestamp system_now() {
    return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
}

// Random version-4 UUID, lowercase hex.
inline std::string make_uuid() {
    thread_local std::mt19937_64 rng{std::random_device{}()};
    std::uint64_t hi = rng(), lo = rng();
    hi = (hi & ~0xF000ULL) | 0x4000ULL;                            // version 4
    lo = (lo & ~(0xC0ULL << 56)) | (0x80ULL << 56);                // variant 10
    char buf[37];
    std::snprintf(buf, sizeof(buf), "%08x-%04x-%04x-%04x-%012llx",
                  static_cast<unsigned>(hi >> 32), static_cast<unsigned>((hi >> 16) & 0xFFFF),
                  static_cast<unsigned>(hi & 0xFFFF), static_cast<unsigned>(lo >> 48),
                  static_cast<unsigned long long>(lo & 0xFFFFFFFFFFFFULL));
    return buf;
}

inline bool looks_like_uuid(std::string_view s) {
    if (s.size() != 36) return false;
    for (size_t i = 0; i < 36; ++i) {
        if (i == 8 || i == 13 || i == 18 || i == 23) {
            if (s[i] != '-') return false;
        } else {
            char c = s[i];
            bool hex = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
            if (!hex) return false;
        }
    }
    return true;
}

}  // namespace ppco

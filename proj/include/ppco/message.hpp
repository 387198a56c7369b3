#pragma once

#include <string>
#include <variant>
#include <vector>

#include "ppco/viewpoint.hpp"
#include "ppco/workflow.hpp"
#include "ppco/xml.hpp"

namespace ppco::msg {

enum class MessageType {
    InformationRequest, InformationResponse, UpdateProposal, ApprovalRequest, ApprovalResponse,
    ChangeNotification, Acknowledgment, Fault
};

inline constexpr std::array<std::string_view, 8> message_type_names{
    "InformationRequest", "InformationResponse", "UpdateProposal", "ApprovalRequest",
    "ApprovalResponse",   "ChangeNotification",  "Acknowledgment", "Fault"};

inline std::string_view to_string(MessageType v) {
    return message_type_names[static_cast<size_t>(v)];
}

inline MessageType message_type_from(std::string_view s) {
    for (size_t i = 0; i < message_type_names.size(); ++i)
        if (message_type_names[i] == s) return static_cast<MessageType>(i);
    throw Error(Errc::unknown_message_type, std::string(s));
}

inline bool is_response(MessageType t) {
    return t == MessageType::InformationResponse || t == MessageType::ApprovalResponse ||
           t == MessageType::Acknowledgment || t == MessageType::Fault;
}

// -- typed bodies -------------------------------------------------------------

struct InformationRequest {
    EntityId product;
    EntityId requesting_user;
    int threshold = 3;
    bool operator==(const InformationRequest&) const = default;
};

struct InformationResponse {
    FilterResult result;
    Payload payload;
    bool operator==(const InformationResponse&) const = default;
};

struct UpdateProposal {
    EntityId target;
    UpdateMode mode = UpdateMode::manual;
    Delta delta;
    bool operator==(const UpdateProposal&) const = default;
};

struct ApprovalRequest {
    EntityId pending;
    EntityId target;
    std::string delta_digest;
    bool operator==(const ApprovalRequest&) const = default;
};

struct ApprovalResponse {
    EntityId pending;
    Verdict verdict = Verdict::approved;
    bool operator==(const ApprovalResponse&) const = default;
};

struct ChangeNotification {
    EntityId target;
    std::uint32_t new_revision = 0;
    std::string digest;
    bool operator==(const ChangeNotification&) const = default;
};

struct Acknowledgment {
    bool operator==(const Acknowledgment&) const = default;
};

struct Fault {
    std::string code;
    std::string text;
    bool operator==(const Fault&) const = default;
};

// Variant order mirrors MessageType.
using Body = std::variant<InformationRequest, InformationResponse, UpdateProposal, ApprovalRequest,
                          ApprovalResponse, ChangeNotification, Acknowledgment, Fault>;

struct Envelope {
    std::string message_id;                   // UUID
    std::optional<std::string> correlation_id;
    MessageType type = MessageType::Acknowledgment;
    EntityId sender_org;
    EntityId receiver_org;
    std::optional<EntityId> sender_user;
    std::string sent_at;                       // UTC ISO-8601, second precision
    std::string schema_version = "1.0";
    Body body = Acknowledgment{};
    bool operator==(const Envelope&) const = default;
};

struct Violation {
    std::string path;
    std::string reason;
    bool operator==(const Violation&) const = default;
};

// -- validation ----------------------------------------------------------------

inline std::vector<Violation> validate(const Envelope& e) {
    std::vector<Violation> out;
    auto bad = [&](std::string path, std::string reason) {
        out.push_back(Violation{std::move(path), std::move(reason)});
    };
    if (!looks_like_uuid(e.message_id)) bad("messageId", "not a UUID");
    if (is_response(e.type)) {
        if (!e.correlation_id) bad("correlationId", "required for response messages");
    }
    if (e.correlation_id && !looks_like_uuid(*e.correlation_id))
        bad("correlationId", "not a UUID");
    if (!e.sender_org.valid()) bad("senderOrg", "invalid id");
    if (!e.receiver_org.valid()) bad("receiverOrg", "invalid id");
    if (e.sender_user && !e.sender_user->valid()) bad("senderUser", "invalid id");
    if (!parse_utc(e.sent_at)) bad("sentAt", "not a UTC second-precision timestamp");
    if (e.schema_version != "1.0") bad("schemaVersion", "unsupported version");
    if (e.body.index() != static_cast<size_t>(e.type)) {
        bad("body", "variant does not match message type");
        return out;  // typed checks below would inspect the wrong alternative
    }
    switch (e.type) {
        case MessageType::InformationRequest: {
            const auto& b = std::get<InformationRequest>(e.body);
            if (!b.product.valid()) bad("body.product", "invalid id");
            if (!b.requesting_user.valid()) bad("body.requestingUser", "invalid id");
            if (b.threshold < 1 || b.threshold > 3) bad("body.threshold", "must be 1, 2 or 3");
            break;
        }
        case MessageType::InformationResponse: {
            const auto& b = std::get<InformationResponse>(e.body);
            if (!b.result.user.valid()) bad("body.filterResult.user", "invalid id");
            if (!b.result.product.valid()) bad("body.filterResult.product", "invalid id");
            for (const auto& c : b.result.connections)
                if (c.level < 1 || c.level > 3) {
                    bad("body.filterResult.connections", "level out of range");
                    break;
                }
            break;
        }
        case MessageType::UpdateProposal: {
            const auto& b = std::get<UpdateProposal>(e.body);
            if (!b.target.valid()) bad("body.target", "invalid id");
            if (b.mode == UpdateMode::xml_file && !b.delta.document_ref)
                bad("body.delta", "xml_file mode requires a document reference");
            if (!e.sender_user) bad("senderUser", "required for update proposals");
            break;
        }
        case MessageType::ApprovalRequest: {
            const auto& b = std::get<ApprovalRequest>(e.body);
            if (!b.pending.valid()) bad("body.pending", "invalid id");
            if (!b.target.valid()) bad("body.target", "invalid id");
            if (b.delta_digest.empty()) bad("body.deltaDigest", "empty digest");
            break;
        }
        case MessageType::ApprovalResponse: {
            const auto& b = std::get<ApprovalResponse>(e.body);
            if (!b.pending.valid()) bad("body.pending", "invalid id");
            if (b.verdict != Verdict::approved && b.verdict != Verdict::rejected)
                bad("body.verdict", "must be approved or rejected");
            if (!e.sender_user) bad("senderUser", "required for approval responses");
            break;
        }
        case MessageType::ChangeNotification: {
            const auto& b = std::get<ChangeNotification>(e.body);
            if (!b.target.valid()) bad("body.target", "invalid id");
            if (b.new_revision == 0) bad("body.newRevision", "must be positive");
            break;
        }
        case MessageType::Acknowledgment:
            break;
        case MessageType::Fault: {
            const auto& b = std::get<Fault>(e.body);
            if (b.code.empty()) bad("body.code", "empty fault code");
            break;
        }
    }
    return out;
}

// -- encoding ---------------------------------------------------------------------

namespace detail {

inline xml::Element filter_result_element(const FilterResult& r) {
    xml::Element e("FilterResult");
    e.add("User", r.user.str());
    e.add("Product", r.product.str());
    xml::Element order("ViewpointOrder");
    for (auto vp : r.viewpoint_order) order.add("Vp", std::to_string(vp));
    e.add(std::move(order));
    xml::Element conns("Connections");
    for (const auto& c : r.connections) {
        xml::Element ce("Connection");
        ce.add("Batch", c.batch);
        ce.add("Level", std::to_string(c.level));
        xml::Element contrib("Contributors");
        for (auto vp : c.contributors) contrib.add("Vp", std::to_string(vp));
        ce.add(std::move(contrib));
        conns.add(std::move(ce));
    }
    e.add(std::move(conns));
    return e;
}

inline xml::Element payload_element(const Payload& p) {
    xml::Element e("Payload");
    for (const auto& f : p) {
        xml::Element fe("Fragment");
        fe.add("Batch", f.batch);
        fe.add("Level", std::to_string(f.level));
        for (const auto& item : f.items) {
            xml::Element ie("Item");
            ie.add("Kind", item.kind);
            ie.add("Ref", item.ref);
            ie.add("Label", item.label);
            fe.add(std::move(ie));
        }
        e.add(std::move(fe));
    }
    return e;
}

inline xml::Element delta_element(const Delta& d) {
    xml::Element e("Delta");
    for (const auto& [k, v] : d.sets) {
        xml::Element se("Set");
        se.add("Key", k);
        se.add("Value", v);
        e.add(std::move(se));
    }
    if (d.document_ref) e.add("DocumentRef", *d.document_ref);
    return e;
}

inline xml::Element body_element(const Envelope& e) {
    xml::Element body("Body");
    switch (e.type) {
        case MessageType::InformationRequest: {
            const auto& b = std::get<InformationRequest>(e.body);
            body.add("Product", b.product.str());
            body.add("RequestingUser", b.requesting_user.str());
            body.add("Threshold", std::to_string(b.threshold));
            break;
        }
        case MessageType::InformationResponse: {
            const auto& b = std::get<InformationResponse>(e.body);
            body.add(filter_result_element(b.result));
            body.add(payload_element(b.payload));
            break;
        }
        case MessageType::UpdateProposal: {
            const auto& b = std::get<UpdateProposal>(e.body);
            body.add("Target", b.target.str());
            body.add("Mode", std::string(to_string(b.mode)));
            body.add(delta_element(b.delta));
            break;
        }
        case MessageType::ApprovalRequest: {
            const auto& b = std::get<ApprovalRequest>(e.body);
            body.add("PendingId", b.pending.str());
            body.add("Target", b.target.str());
            body.add("DeltaDigest", b.delta_digest);
            break;
        }
        case MessageType::ApprovalResponse: {
            const auto& b = std::get<ApprovalResponse>(e.body);
            body.add("PendingId", b.pending.str());
            body.add("Verdict", std::string(to_string(b.verdict)));
            break;
        }
        case MessageType::ChangeNotification: {
            const auto& b = std::get<ChangeNotification>(e.body);
            body.add("Target", b.target.str());
            body.add("NewRevision", std::to_string(b.new_revision));
            body.add("Digest", b.digest);
            break;
        }
        case MessageType::Acknowledgment:
            break;
        case MessageType::Fault: {
            const auto& b = std::get<Fault>(e.body);
            body.add("Code", b.code);
            body.add("Text", b.text);
            break;
        }
    }
    return body;
}

}  // namespace detail

// Canonical encoding: UTF-8, no BOM, no declaration, elements only, fixed
// element order, single line. Equal envelopes produce identical bytes.
inline std::string encode(const Envelope& e) {
    auto violations = validate(e);
    if (!violations.empty())
        throw Error(Errc::invalid_envelope, violations.front().reason, violations.front().path);
    xml::Element root("Message");
    root.add("MessageId", e.message_id);
    if (e.correlation_id) root.add("CorrelationId", *e.correlation_id);
    root.add("Type", std::string(to_string(e.type)));
    root.add("SenderOrg", e.sender_org.str());
    root.add("ReceiverOrg", e.receiver_org.str());
    if (e.sender_user) root.add("SenderUser", e.sender_user->str());
    root.add("SentAt", e.sent_at);
    root.add("SchemaVersion", e.schema_version);
    root.add(detail::body_element(e));
    return xml::write(root);
}

// -- decoding ---------------------------------------------------------------------

namespace detail {

[[noreturn]] inline void schema_fail(const std::string& path, const std::string& why) {
    throw Error(Errc::schema_violation, why, path);
}

// Strict in-order walker over one element's children.
class Cursor {
public:
    Cursor(const xml::Element& e, std::string path) : e_(e), path_(std::move(path)) {}

    const xml::Element& expect(std::string_view name) {
        const xml::Element* c = maybe(name);
        if (!c) schema_fail(path_ + "/" + std::string(name), "missing element");
        return *c;
    }

    const xml::Element* maybe(std::string_view name) {
        if (i_ < e_.children.size() && e_.children[i_].name == name) return &e_.children[i_++];
        return nullptr;
    }

    // Remaining children, all required to carry the given name.
    std::vector<const xml::Element*> rest(std::string_view name) {
        std::vector<const xml::Element*> out;
        while (i_ < e_.children.size()) {
            if (e_.children[i_].name != name)
                schema_fail(path_ + "/" + e_.children[i_].name, "unexpected element");
            out.push_back(&e_.children[i_++]);
        }
        return out;
    }

    void done() {
        if (i_ < e_.children.size())
            schema_fail(path_ + "/" + e_.children[i_].name, "unexpected element");
    }

    const std::string& path() const { return path_; }

private:
    const xml::Element& e_;
    std::string path_;
    size_t i_ = 0;
};

inline std::string text_of(const xml::Element& e, const std::string& path) {
    if (!e.children.empty()) schema_fail(path, "expected text content");
    return e.text;
}

inline EntityId id_of(const xml::Element& e, const std::string& path) {
    auto id = EntityId::try_parse(text_of(e, path));
    if (!id) schema_fail(path, "not an entity id");
    return *id;
}

inline std::uint64_t uint_of(const xml::Element& e, const std::string& path) {
    std::string t = text_of(e, path);
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
        schema_fail(path, "not an unsigned integer");
    return std::stoull(t);
}

inline int level_of(const xml::Element& e, const std::string& path) {
    auto v = uint_of(e, path);
    if (v < 1 || v > 3) schema_fail(path, "level out of range");
    return static_cast<int>(v);
}

inline FilterResult filter_result_of(const xml::Element& e, const std::string& path) {
    Cursor c(e, path);
    FilterResult r;
    r.user = id_of(c.expect("User"), path + "/User");
    r.product = id_of(c.expect("Product"), path + "/Product");
    {
        const auto& order = c.expect("ViewpointOrder");
        Cursor oc(order, path + "/ViewpointOrder");
        for (const auto* vp : oc.rest("Vp"))
            r.viewpoint_order.push_back(uint_of(*vp, path + "/ViewpointOrder/Vp"));
    }
    {
        const auto& conns = c.expect("Connections");
        Cursor cc(conns, path + "/Connections");
        for (const auto* ce : cc.rest("Connection")) {
            std::string cpath = path + "/Connections/Connection";
            Cursor ccc(*ce, cpath);
            Connection conn;
            conn.batch = text_of(ccc.expect("Batch"), cpath + "/Batch");
            conn.level = level_of(ccc.expect("Level"), cpath + "/Level");
            const auto& contrib = ccc.expect("Contributors");
            Cursor tc(contrib, cpath + "/Contributors");
            for (const auto* vp : tc.rest("Vp"))
                conn.contributors.push_back(uint_of(*vp, cpath + "/Contributors/Vp"));
            ccc.done();
            r.connections.push_back(std::move(conn));
        }
    }
    c.done();
    return r;
}

inline Payload payload_of(const xml::Element& e, const std::string& path) {
    Payload p;
    Cursor c(e, path);
    for (const auto* fe : c.rest("Fragment")) {
        std::string fpath = path + "/Fragment";
        Cursor fc(*fe, fpath);
        Fragment f;
        f.batch = text_of(fc.expect("Batch"), fpath + "/Batch");
        f.level = level_of(fc.expect("Level"), fpath + "/Level");
        for (const auto* ie : fc.rest("Item")) {
            std::string ipath = fpath + "/Item";
            Cursor ic(*ie, ipath);
            PayloadItem item;
            item.kind = text_of(ic.expect("Kind"), ipath + "/Kind");
            item.ref = text_of(ic.expect("Ref"), ipath + "/Ref");
            item.label = text_of(ic.expect("Label"), ipath + "/Label");
            ic.done();
            f.items.push_back(std::move(item));
        }
        p.push_back(std::move(f));
    }
    return p;
}

inline Delta delta_of(const xml::Element& e, const std::string& path) {
    Delta d;
    Cursor c(e, path);
    while (const auto* se = c.maybe("Set")) {
        std::string spath = path + "/Set";
        Cursor sc(*se, spath);
        std::string k = text_of(sc.expect("Key"), spath + "/Key");
        std::string v = text_of(sc.expect("Value"), spath + "/Value");
        sc.done();
        d.sets.emplace_back(std::move(k), std::move(v));
    }
    if (const auto* doc = c.maybe("DocumentRef"))
        d.document_ref = text_of(*doc, path + "/DocumentRef");
    c.done();
    return d;
}

inline Body body_of(MessageType type, const xml::Element& e) {
    std::string path = "Message/Body";
    Cursor c(e, path);
    switch (type) {
        case MessageType::InformationRequest: {
            InformationRequest b;
            b.product = id_of(c.expect("Product"), path + "/Product");
            b.requesting_user = id_of(c.expect("RequestingUser"), path + "/RequestingUser");
            b.threshold = level_of(c.expect("Threshold"), path + "/Threshold");
            c.done();
            return b;
        }
        case MessageType::InformationResponse: {
            InformationResponse b;
            b.result = filter_result_of(c.expect("FilterResult"), path + "/FilterResult");
            b.payload = payload_of(c.expect("Payload"), path + "/Payload");
            c.done();
            return b;
        }
        case MessageType::UpdateProposal: {
            UpdateProposal b;
            b.target = id_of(c.expect("Target"), path + "/Target");
            std::string mode = text_of(c.expect("Mode"), path + "/Mode");
            if (mode == "manual")
                b.mode = UpdateMode::manual;
            else if (mode == "xml_file")
                b.mode = UpdateMode::xml_file;
            else
                schema_fail(path + "/Mode", "unknown mode '" + mode + "'");
            b.delta = delta_of(c.expect("Delta"), path + "/Delta");
            c.done();
            return b;
        }
        case MessageType::ApprovalRequest: {
            ApprovalRequest b;
            b.pending = id_of(c.expect("PendingId"), path + "/PendingId");
            b.target = id_of(c.expect("Target"), path + "/Target");
            b.delta_digest = text_of(c.expect("DeltaDigest"), path + "/DeltaDigest");
            c.done();
            return b;
        }
        case MessageType::ApprovalResponse: {
            ApprovalResponse b;
            b.pending = id_of(c.expect("PendingId"), path + "/PendingId");
            std::string v = text_of(c.expect("Verdict"), path + "/Verdict");
            if (v == "approved")
                b.verdict = Verdict::approved;
            else if (v == "rejected")
                b.verdict = Verdict::rejected;
            else
                schema_fail(path + "/Verdict", "unknown verdict '" + v + "'");
            c.done();
            return b;
        }
        case MessageType::ChangeNotification: {
            ChangeNotification b;
            b.target = id_of(c.expect("Target"), path + "/Target");
            b.new_revision = static_cast<std::uint32_t>(
                uint_of(c.expect("NewRevision"), path + "/NewRevision"));
            b.digest = text_of(c.expect("Digest"), path + "/Digest");
            c.done();
            return b;
        }
        case MessageType::Acknowledgment: {
            c.done();
            if (!e.text.empty()) schema_fail(path, "acknowledgment body must be empty");
            return Acknowledgment{};
        }
        case MessageType::Fault: {
            Fault b;
            b.code = text_of(c.expect("Code"), path + "/Code");
            b.text = text_of(c.expect("Text"), path + "/Text");
            c.done();
            return b;
        }
    }
    throw Error(Errc::internal, "unreachable");
}

}  // namespace detail

inline Envelope decode(std::string_view bytes) {
    xml::Element root = xml::parse(bytes);
    if (root.name != "Message")
        detail::schema_fail(root.name, "document element must be <Message>");
    detail::Cursor c(root, "Message");
    Envelope e;
    e.message_id = detail::text_of(c.expect("MessageId"), "Message/MessageId");
    if (const auto* corr = c.maybe("CorrelationId"))
        e.correlation_id = detail::text_of(*corr, "Message/CorrelationId");
    e.type = message_type_from(detail::text_of(c.expect("Type"), "Message/Type"));
    e.sender_org = detail::id_of(c.expect("SenderOrg"), "Message/SenderOrg");
    e.receiver_org = detail::id_of(c.expect("ReceiverOrg"), "Message/ReceiverOrg");
    if (const auto* su = c.maybe("SenderUser"))
        e.sender_user = detail::id_of(*su, "Message/SenderUser");
    e.sent_at = detail::text_of(c.expect("SentAt"), "Message/SentAt");
    if (!parse_utc(e.sent_at)) detail::schema_fail("Message/SentAt", "bad timestamp");
    e.schema_version = detail::text_of(c.expect("SchemaVersion"), "Message/SchemaVersion");
    e.body = detail::body_of(e.type, c.expect("Body"));
    c.done();
    if (!looks_like_uuid(e.message_id))
        detail::schema_fail("Message/MessageId", "not a UUID");
    if (is_response(e.type) && !e.correlation_id)
        detail::schema_fail("Message/CorrelationId", "required for response messages");
    return e;
}

}  // namespace ppco::msg

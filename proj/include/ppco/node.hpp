#pragma once

#include <atomic>
#include <memory>
#include <thread>
#include <vector>

#include "ppco/net.hpp"
#include "ppco/session.hpp"

namespace ppco {

struct NodeConfig {
    EntityId org;
    std::string listen;
    std::vector<std::pair<EntityId, std::string>> peers;  // org -> endpoint, insertion order
    std::vector<fs::path> fixtures;
    std::vector<EntityId> users;  // roster of users homed at this node
    fs::path store_dir;

    void validate() const {
        if (!org.valid()) throw Error(Errc::fixture_error, "node org id invalid");
        std::vector<std::string> endpoints;
        for (const auto& [peer, ep] : peers) {
            if (peer == org)
                throw Error(Errc::fixture_error, "node cannot list itself as a peer");
            endpoints.push_back(ep);
        }
        std::sort(endpoints.begin(), endpoints.end());
        if (std::adjacent_find(endpoints.begin(), endpoints.end()) != endpoints.end())
            throw Error(Errc::fixture_error, "duplicate peer endpoints");
    }

    static NodeConfig from_json(const Json& j, const fs::path& base_dir) {
        NodeConfig c;
        c.org = EntityId::parse(j.at("org").get<std::string>());
        c.listen = j.at("listen").get<std::string>();
        if (j.contains("peers"))
            for (const auto& [org, ep] : j.at("peers").items())
                c.peers.emplace_back(EntityId::parse(org), ep.get<std::string>());
        if (j.contains("fixtures"))
            for (const auto& f : j.at("fixtures"))
                c.fixtures.push_back(base_dir / f.get<std::string>());
        if (j.contains("users"))
            for (const auto& u : j.at("users")) c.users.push_back(EntityId::parse(u.get<std::string>()));
        if (j.contains("store"))
            c.store_dir = base_dir / j.at("store").get<std::string>();
        else
            c.store_dir = base_dir / ("store_" + c.org.ns);
        c.validate();
        return c;
    }

    static NodeConfig load(const fs::path& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw Error(Errc::fixture_error, "cannot open node config " + path.string());
        Json j;
        try {
            j = Json::parse(f);
        } catch (const std::exception& ex) {
            throw Error(Errc::fixture_error, path.string() + ": " + ex.what());
        }
        return from_json(j, path.parent_path());
    }
};

// A runnable supply-chain organization node: hosts a store, answers filter
// queries, and drives the approval workflow across peers.
class Node {
public:
    struct Receipt {
        msg::Envelope reply;
    };

    Node(NodeConfig cfg, std::shared_ptr<net::Transport> transport)
        : cfg_(std::move(cfg)), transport_(std::move(transport)) {
        cfg_.validate();
    }

    ~Node() { stop(); }

    const NodeConfig& config() const { return cfg_; }
    Session& session() { return *session_; }

    // Bound endpoint once started (resolves ":0" style listen addresses).
    std::string endpoint() const { return listener_ ? listener_->endpoint() : cfg_.listen; }

    void start() {
        if (session_) return;
        Repository::Options ropt;
        ropt.default_ns = cfg_.org.ns;
        ropt.service_mode = true;
        session_ = std::make_unique<Session>(cfg_.store_dir, Store::Options(), ropt);
        for (const auto& f : cfg_.fixtures) load_fixture(*session_, f);
        session_->workflow.on_commit(
            [this](const PendingUpdate& p, const Workflow::CommitNotice& n) {
                broadcast_change(p, n);
            });
        listener_ = transport_->listen(cfg_.listen);
        running_ = true;
        accept_thread_ = std::thread([this] { accept_loop(); });
    }

    void stop() {
        if (!running_.exchange(false)) {
            if (accept_thread_.joinable()) accept_thread_.join();
            return;
        }
        if (listener_) listener_->close();
        {
            std::scoped_lock lk(conn_mu_);
            for (auto& c : conns_) c->stream->close();
        }
        {
            std::scoped_lock lk(peer_mu_);
            for (auto& [org, stream] : peer_conns_)
                if (stream) stream->close();
            peer_conns_.clear();
        }
        if (accept_thread_.joinable()) accept_thread_.join();
        std::vector<std::unique_ptr<Conn>> conns;
        {
            std::scoped_lock lk(conn_mu_);
            conns.swap(conns_);
        }
        for (auto& c : conns)
            if (c->worker.joinable()) c->worker.join();
    }

    // Dispatch one validated envelope. Returns the reply to send back; every
    // handler error becomes a Fault instead of escaping.
    std::optional<msg::Envelope> handle(const msg::Envelope& env) {
        session_->store.append_trace(env.sender_org, TraceKind::message_received, env.sender_user,
                                     digest(env.message_id + "|" +
                                            std::string(msg::to_string(env.type))));
        try {
            switch (env.type) {
                case msg::MessageType::InformationRequest:
                    return handle_information_request(env);
                case msg::MessageType::UpdateProposal:
                    return handle_update_proposal(env);
                case msg::MessageType::ApprovalResponse:
                    return handle_approval_response(env);
                default:
                    return make_reply(env, msg::MessageType::Acknowledgment,
                                      msg::Acknowledgment{});
            }
        } catch (const Error& e) {
            return fault_reply(env, std::string(to_string(e.code())), e.what());
        } catch (const std::exception& e) {
            return fault_reply(env, "Internal", e.what());
        }
    }

    // Framed send to a configured peer; blocks until the peer's reply frame.
    Receipt send(const EntityId& peer_org, msg::Envelope env) {
        const std::string* endpoint = nullptr;
        for (const auto& [org, ep] : cfg_.peers)
            if (org == peer_org) endpoint = &ep;
        if (!endpoint) throw Error(Errc::unknown_peer, peer_org.str());

        std::string bytes = msg::encode(env);
        std::scoped_lock lk(peer_mu_);
        net::Stream* stream = peer_stream(peer_org, *endpoint);
        std::optional<std::string> reply_bytes;
        try {
            net::write_frame(*stream, bytes);
            session_->store.append_trace(peer_org, TraceKind::message_sent, env.sender_user,
                                         digest(bytes));
            reply_bytes = net::read_frame(*stream);
        } catch (...) {
            drop_peer_stream(peer_org);
            throw;
        }
        if (!reply_bytes) {
            drop_peer_stream(peer_org);
            throw Error(Errc::transport_closed, "peer " + peer_org.str() + " closed the stream");
        }
        msg::Envelope reply = msg::decode(*reply_bytes);
        session_->store.append_trace(reply.sender_org, TraceKind::message_received,
                                     reply.sender_user,
                                     digest(reply.message_id + "|" +
                                            std::string(msg::to_string(reply.type))));
        if (reply.type == msg::MessageType::Fault) {
            const auto& f = std::get<msg::Fault>(reply.body);
            throw Error(Errc::peer_fault, f.code + ": " + f.text);
        }
        return Receipt{std::move(reply)};
    }

    // Envelope skeleton stamped with this node's identity.
    msg::Envelope make_envelope(msg::MessageType type, const EntityId& receiver_org,
                                msg::Body body, std::optional<EntityId> sender_user = {}) const {
        msg::Envelope e;
        e.message_id = make_uuid();
        e.type = type;
        e.sender_org = cfg_.org;
        e.receiver_org = receiver_org;
        e.sender_user = std::move(sender_user);
        e.sent_at = format_utc(session_ ? session_->store.now() : system_now());
        e.body = std::move(body);
        return e;
    }

    // Peers that home at least one of the given users, roster order.
    std::vector<EntityId> peers_homing(const std::vector<EntityId>& users) const {
        std::vector<EntityId> out;
        for (const auto& [peer, ep] : cfg_.peers) {
            (void)ep;
            bool hit = false;
            for (const auto& u : users)
                if (u.ns == peer.ns) hit = true;
            if (hit) out.push_back(peer);
        }
        return out;
    }

    bool homes(const EntityId& user) const {
        for (const auto& u : cfg_.users)
            if (u == user) return true;
        return false;
    }

private:
    struct Conn {
        std::unique_ptr<net::Stream> stream;
        std::thread worker;
    };

    void accept_loop() {
        while (running_) {
            std::unique_ptr<net::Stream> stream = listener_->accept();
            if (!stream) break;
            auto conn = std::make_unique<Conn>();
            conn->stream = std::move(stream);
            Conn* raw = conn.get();
            conn->worker = std::thread([this, raw] { serve(raw->stream.get()); });
            std::scoped_lock lk(conn_mu_);
            conns_.push_back(std::move(conn));
        }
    }

    // One inbound connection: each frame yields exactly one reply frame. A
    // malformed frame answers Fault and the connection stays usable.
    void serve(net::Stream* stream) {
        for (;;) {
            std::optional<std::string> frame;
            try {
                frame = net::read_frame(*stream);
            } catch (...) {
                break;  // framing violation or closed: nothing sane to reply to
            }
            if (!frame) break;
            msg::Envelope reply;
            try {
                msg::Envelope env = msg::decode(*frame);
                auto violations = msg::validate(env);
                if (!violations.empty()) {
                    reply = fault_reply(env, "SchemaViolation",
                                        violations.front().path + ": " +
                                            violations.front().reason);
                } else {
                    std::optional<msg::Envelope> r = handle(env);
                    reply = r ? std::move(*r)
                              : make_reply(env, msg::MessageType::Acknowledgment,
                                           msg::Acknowledgment{});
                }
            } catch (const Error& e) {
                reply = anonymous_fault(std::string(to_string(e.code())), e.what());
            } catch (const std::exception& e) {
                reply = anonymous_fault("Internal", e.what());
            }
            try {
                net::write_frame(*stream, msg::encode(reply));
            } catch (...) {
                break;
            }
        }
    }

    msg::Envelope make_reply(const msg::Envelope& to, msg::MessageType type,
                             msg::Body body) const {
        msg::Envelope e = make_envelope(type, to.sender_org, std::move(body));
        e.correlation_id = to.message_id;
        return e;
    }

    msg::Envelope fault_reply(const msg::Envelope& to, std::string code, std::string text) const {
        msg::Envelope e = make_reply(to, msg::MessageType::Fault, msg::Fault{});
        e.receiver_org = to.sender_org.valid() ? to.sender_org : cfg_.org;
        e.correlation_id = looks_like_uuid(to.message_id) ? to.message_id : e.message_id;
        e.body = msg::Fault{std::move(code), std::move(text)};
        return e;
    }

    msg::Envelope anonymous_fault(std::string code, std::string text) const {
        msg::Envelope e = make_envelope(msg::MessageType::Fault, cfg_.org,
                                        msg::Fault{std::move(code), std::move(text)});
        e.correlation_id = e.message_id;  // nothing decodable to correlate with
        return e;
    }

    std::optional<msg::Envelope> handle_information_request(const msg::Envelope& env) {
        const auto& b = std::get<msg::InformationRequest>(env.body);
        FilterResult result = session_->engine.filtering_info_artifact(b.product,
                                                                       b.requesting_user);
        Payload payload = session_->engine.materialize(result, b.threshold);
        return make_reply(env, msg::MessageType::InformationResponse,
                          msg::InformationResponse{std::move(result), std::move(payload)});
    }

    std::optional<msg::Envelope> handle_update_proposal(const msg::Envelope& env) {
        const auto& b = std::get<msg::UpdateProposal>(env.body);
        std::scoped_lock lk(artifact_mutex(b.target));
        EntityId pending_id =
            session_->workflow.submit_update(*env.sender_user, b.target, b.delta, b.mode);
        PendingUpdate p = session_->workflow.pending(pending_id);
        if (p.state == UpdateState::open) {
            for (const auto& peer : peers_homing(p.outstanding())) {
                send(peer, make_envelope(msg::MessageType::ApprovalRequest, peer,
                                         msg::ApprovalRequest{p.id, p.target,
                                                              p.delta.content_digest()}));
            }
        }
        return make_reply(env, msg::MessageType::Acknowledgment, msg::Acknowledgment{});
    }

    std::optional<msg::Envelope> handle_approval_response(const msg::Envelope& env) {
        const auto& b = std::get<msg::ApprovalResponse>(env.body);
        PendingUpdate p = session_->workflow.pending(b.pending);
        std::scoped_lock lk(artifact_mutex(p.target));
        session_->workflow.record_verdict(b.pending, *env.sender_user, b.verdict);
        return make_reply(env, msg::MessageType::Acknowledgment, msg::Acknowledgment{});
    }

    // Keeps peer caches coherent: committed changes go to every peer.
    void broadcast_change(const PendingUpdate& p, const Workflow::CommitNotice& n) {
        for (const auto& [peer, ep] : cfg_.peers) {
            (void)ep;
            try {
                send(peer, make_envelope(msg::MessageType::ChangeNotification, peer,
                                         msg::ChangeNotification{n.target, n.new_revision,
                                                                 n.digest},
                                         p.submitter));
            } catch (const Error&) {
                // A down peer must not unwind the commit.
            }
        }
    }

    net::Stream* peer_stream(const EntityId& peer, const std::string& endpoint) {
        auto it = peer_conns_.find(peer);
        if (it == peer_conns_.end() || !it->second)
            peer_conns_[peer] = transport_->connect(endpoint);
        return peer_conns_[peer].get();
    }

    void drop_peer_stream(const EntityId& peer) { peer_conns_.erase(peer); }

    std::mutex& artifact_mutex(const EntityId& id) {
        std::scoped_lock lk(artifact_mu_);
        return artifact_locks_[id];
    }

    NodeConfig cfg_;
    std::shared_ptr<net::Transport> transport_;
    std::unique_ptr<Session> session_;
    std::unique_ptr<net::Listener> listener_;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::mutex conn_mu_;
    std::vector<std::unique_ptr<Conn>> conns_;
    std::recursive_mutex peer_mu_;
    std::map<EntityId, std::unique_ptr<net::Stream>> peer_conns_;
    std::mutex artifact_mu_;
    std::map<EntityId, std::mutex> artifact_locks_;
};

}  // namespace ppco

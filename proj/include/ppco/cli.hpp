#pragma once

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ppco/node.hpp"
#include "ppco/session.hpp"

namespace ppco::cli {

inline std::string format_vp(std::uint64_t vp) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%02llu", static_cast<unsigned long long>(vp));
    return buf;
}

inline std::string join_vps(const std::vector<std::uint64_t>& vps) {
    std::string out;
    for (size_t i = 0; i < vps.size(); ++i) {
        if (i > 0) out += ", ";
        out += format_vp(vps[i]);
    }
    return out;
}

inline void print_filter_table(const FilterResult& r, std::ostream& out) {
    out << "viewpoints: " << join_vps(r.viewpoint_order) << "\n";
    out << "batch | level | contributors\n";
    for (const auto& c : r.connections)
        out << c.batch << " | " << c.level << " | " << join_vps(c.contributors) << "\n";
}

inline FilterResult pruned(FilterResult r, int threshold) {
    std::erase_if(r.connections, [&](const Connection& c) { return c.level > threshold; });
    return r;
}

inline EntityId parse_id_arg(const std::string& s, const std::string& flag) {
    auto id = EntityId::try_parse(s);
    if (!id) throw CLI::ValidationError(flag, "expected ns:number, got '" + s + "'");
    return *id;
}

inline std::atomic<bool>& serve_interrupted() {
    static std::atomic<bool> flag{false};
    return flag;
}

// Entry point shared by the binary and the test suites. Returns the process
// exit code: 0 success, 1 domain error, 2 usage error.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"collaborative product information exchange"};
    app.name("ppco");
    app.require_subcommand(1);

    std::string store_dir = "./store";

    // fixture load <path>
    auto* fixture = app.add_subcommand("fixture", "manage fixture documents");
    fixture->require_subcommand(1);
    auto* fixture_load = fixture->add_subcommand("load", "load a fixture document");
    std::string fixture_path;
    fixture_load->add_option("path", fixture_path, "fixture JSON document")->required();
    fixture_load->add_option("--store", store_dir, "store directory");

    // filter
    auto* filter = app.add_subcommand("filter", "run viewpoint filtering for a user and artifact");
    std::string filter_user, filter_artifact, filter_format = "table";
    int filter_threshold = 3;
    filter->add_option("--user", filter_user, "user id")->required();
    filter->add_option("--artifact", filter_artifact, "artifact id")->required();
    filter->add_option("--threshold", filter_threshold, "keep connections with level <= N")
        ->check(CLI::Range(1, 3));
    filter->add_option("--format", filter_format, "table or json")
        ->check(CLI::IsMember({"table", "json"}));
    filter->add_option("--store", store_dir, "store directory");

    // update submit|approve|reject|status
    auto* update = app.add_subcommand("update", "drive the approval workflow");
    update->require_subcommand(1);
    std::string up_user, up_artifact, up_pending, up_document;
    std::vector<std::string> up_sets;
    auto* up_submit = update->add_subcommand("submit", "propose an update");
    up_submit->add_option("--user", up_user, "submitting user id")->required();
    up_submit->add_option("--artifact", up_artifact, "target artifact id")->required();
    up_submit->add_option("--set", up_sets, "attribute assignment key=value");
    up_submit->add_option("--document", up_document, "imported XML document reference");
    up_submit->add_option("--store", store_dir, "store directory");
    auto* up_approve = update->add_subcommand("approve", "record an approval");
    up_approve->add_option("--user", up_user, "voting user id")->required();
    up_approve->add_option("--pending", up_pending, "pending update id")->required();
    up_approve->add_option("--store", store_dir, "store directory");
    auto* up_reject = update->add_subcommand("reject", "record a rejection");
    up_reject->add_option("--user", up_user, "voting user id")->required();
    up_reject->add_option("--pending", up_pending, "pending update id")->required();
    up_reject->add_option("--store", store_dir, "store directory");
    auto* up_status = update->add_subcommand("status", "show a pending update");
    up_status->add_option("--pending", up_pending, "pending update id")->required();
    up_status->add_option("--store", store_dir, "store directory");

    // trace <id>
    auto* trace = app.add_subcommand("trace", "dump the trace of a subject as NDJSON");
    std::string trace_subject;
    trace->add_option("id", trace_subject, "subject entity id")->required();
    trace->add_option("--store", store_dir, "store directory");

    // node serve
    auto* node_cmd = app.add_subcommand("node", "run an organization node");
    node_cmd->require_subcommand(1);
    auto* node_serve = node_cmd->add_subcommand("serve", "serve peers until interrupted");
    std::string config_path;
    node_serve->add_option("--config", config_path, "node configuration file");

    // msg send
    auto* msg_cmd = app.add_subcommand("msg", "ad-hoc message exchange");
    msg_cmd->require_subcommand(1);
    auto* msg_send = msg_cmd->add_subcommand("send", "send one envelope to a peer");
    std::string msg_peer, msg_file;
    msg_send->add_option("--peer", msg_peer, "peer org id")->required();
    msg_send->add_option("--file", msg_file, "envelope XML file")->required();
    msg_send->add_option("--config", config_path, "node configuration file");

    std::vector<const char*> argv;
    argv.push_back("ppco");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    auto open_read = [&] {
        Store::Options sopt;
        sopt.mode = Store::Mode::read_only;
        return std::make_unique<Session>(store_dir, sopt, Repository::Options());
    };
    auto open_write = [&] { return std::make_unique<Session>(store_dir); };

    auto resolve_config = [&]() -> fs::path {
        if (!config_path.empty()) return config_path;
        if (const char* env = std::getenv("PPCO_NODE_CONFIG")) return env;
        throw Error(Errc::usage, "no node config: pass --config or set PPCO_NODE_CONFIG");
    };

    try {
        if (fixture_load->parsed()) {
            auto s = open_write();
            FixtureCounts counts = load_fixture(*s, fixture_path);
            for (const auto& [key, n] : counts) out << key << ": " << n << "\n";
            return 0;
        }
        if (filter->parsed()) {
            auto s = open_read();
            FilterResult r = s->engine.filtering_info_artifact(
                parse_id_arg(filter_artifact, "--artifact"), parse_id_arg(filter_user, "--user"));
            r = pruned(std::move(r), filter_threshold);
            if (filter_format == "json")
                out << js::filter_result_json(r).dump() << "\n";
            else
                print_filter_table(r, out);
            return 0;
        }
        if (up_submit->parsed()) {
            auto s = open_write();
            Delta delta;
            for (const auto& kv : up_sets) {
                auto eq = kv.find('=');
                if (eq == std::string::npos || eq == 0) {
                    err << "usage error: --set expects key=value, got '" << kv << "'\n";
                    return 2;
                }
                delta.sets.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
            }
            UpdateMode mode = UpdateMode::manual;
            if (!up_document.empty()) {
                mode = UpdateMode::xml_file;
                delta.document_ref = up_document;
            }
            EntityId pending = s->workflow.submit_update(parse_id_arg(up_user, "--user"),
                                                         parse_id_arg(up_artifact, "--artifact"),
                                                         std::move(delta), mode);
            out << pending.str() << " " << to_string(s->workflow.pending(pending).state) << "\n";
            return 0;
        }
        if (up_approve->parsed() || up_reject->parsed()) {
            auto s = open_write();
            UpdateState state = s->workflow.record_verdict(
                parse_id_arg(up_pending, "--pending"), parse_id_arg(up_user, "--user"),
                up_approve->parsed() ? Verdict::approved : Verdict::rejected);
            out << to_string(state) << "\n";
            return 0;
        }
        if (up_status->parsed()) {
            auto s = open_read();
            PendingUpdate p = s->workflow.pending(parse_id_arg(up_pending, "--pending"));
            out << p.id.str() << " " << to_string(p.state) << " target=" << p.target.str() << "\n";
            for (const auto& [u, v] : p.verdicts)
                out << u.str() << " " << to_string(v) << "\n";
            return 0;
        }
        if (trace->parsed()) {
            auto s = open_read();
            for (const auto& e : s->store.trace(parse_id_arg(trace_subject, "id")))
                out << e.to_json().dump() << "\n";
            return 0;
        }
        if (node_serve->parsed()) {
            NodeConfig cfg = NodeConfig::load(resolve_config());
            Node node(cfg, std::make_shared<net::TcpTransport>());
            node.start();
            out << "node " << cfg.org.str() << " listening on " << node.endpoint() << "\n";
            out.flush();
            std::signal(SIGINT, [](int) { serve_interrupted() = true; });
            std::signal(SIGTERM, [](int) { serve_interrupted() = true; });
            while (!serve_interrupted())
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
            node.stop();
            return 0;
        }
        if (msg_send->parsed()) {
            NodeConfig cfg = NodeConfig::load(resolve_config());
            std::ifstream f(msg_file, std::ios::binary);
            if (!f) throw Error(Errc::usage, "cannot open " + msg_file);
            std::ostringstream ss;
            ss << f.rdbuf();
            msg::Envelope env = msg::decode(ss.str());
            auto violations = msg::validate(env);
            if (!violations.empty())
                throw Error(Errc::invalid_envelope, violations.front().reason,
                            violations.front().path);
            const std::string* endpoint = nullptr;
            EntityId peer = parse_id_arg(msg_peer, "--peer");
            for (const auto& [org, ep] : cfg.peers)
                if (org == peer) endpoint = &ep;
            if (!endpoint) throw Error(Errc::unknown_peer, peer.str());
            net::TcpTransport transport;
            auto stream = transport.connect(*endpoint);
            net::write_frame(*stream, msg::encode(env));
            auto reply_bytes = net::read_frame(*stream);
            if (!reply_bytes) throw Error(Errc::transport_closed, "peer closed the stream");
            msg::Envelope reply = msg::decode(*reply_bytes);
            out << *reply_bytes << "\n";
            if (reply.type == msg::MessageType::Fault) return 1;
            return 0;
        }
    } catch (const CLI::ValidationError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "Internal: " << e.what() << "\n";
        return 1;
    }
    err << "usage error: no command\n";
    return 2;
}

}  // namespace ppco::cli

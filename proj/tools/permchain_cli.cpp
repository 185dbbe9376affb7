#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "permchain/chain.hpp"
#include "permchain/http_binding.hpp"
#include "permchain/netsim.hpp"
#include "permchain/scenario.hpp"

using nlohmann::json;
using namespace permchain;

namespace {

int write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return 0;
    }
    std::ofstream out(path);
    if (!out) {
        std::cerr << "cannot write " << path << "\n";
        return 1;
    }
    out << text;
    return 0;
}

int cmd_keygen(const std::string& seed_arg) {
    KeyPair kp;
    json j;
    if (!seed_arg.empty()) {
        json sv;
        if (seed_arg.find_first_not_of("0123456789") == std::string::npos && seed_arg.size() <= 19)
            sv = std::stoull(seed_arg);
        else
            sv = seed_arg;
        Seed32 seed = parse_seed(sv);
        kp = keypair_from_seed(seed);
        j["seed"] = to_hex(Bytes(seed.b.begin(), seed.b.end()));
    } else {
        kp = random_keypair();
    }
    j["address"] = address_of(kp.pk).hex();
    j["public_key"] = kp.pk.hex();
    j["secret_key"] = kp.sk.hex();
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_scenario_run(const std::string& file, const std::string& transcript_out,
                     const std::string& chain_out) {
    json sj = load_scenario_file(file);
    std::string dir = std::filesystem::path(file).parent_path().string();
    if (dir.empty()) dir = ".";
    ScenarioRunner runner(sj, dir);
    ScenarioResult r = runner.run();

    if (!transcript_out.empty()) {
        if (int rc = write_text(transcript_out, r.transcript.dump(2) + "\n")) return rc;
    }
    if (!chain_out.empty()) {
        if (int rc = write_text(chain_out, runner.chain().export_jsonl())) return rc;
    }

    std::cout << "scenario " << runner.name() << ": " << (r.ok ? "OK" : "FAILED") << " (height "
              << runner.chain().height() << ", state root "
              << runner.chain().state().root().hex().substr(0, 16) << "...)\n";
    for (const auto& f : r.failures) std::cerr << "  " << f << "\n";
    return r.ok ? 0 : 1;
}

sim::SimConfig load_sim_config(const std::string& config_file) {
    sim::SimConfig cfg;
    if (config_file.empty()) return cfg;
    std::ifstream in(config_file);
    if (!in) throw Error(Errc::NotFound, "config file not found: " + config_file);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, std::string("config parse error: ") + e.what());
    }
    cfg = j.get<sim::SimConfig>();
    return cfg;
}

int cmd_simulate(sim::SimConfig cfg, const std::string& sweep, const std::string& csv_out,
                 const std::string& out) {
    if (!sweep.empty()) {
        auto eq = sweep.find('=');
        if (eq == std::string::npos)
            throw Error(Errc::ConfigInvalid, "--sweep wants axis=v1,v2,...");
        std::string axis = sweep.substr(0, eq);
        std::vector<double> values;
        std::string rest = sweep.substr(eq + 1);
        for (std::size_t pos = 0; pos < rest.size();) {
            auto comma = rest.find(',', pos);
            if (comma == std::string::npos) comma = rest.size();
            values.push_back(std::stod(rest.substr(pos, comma - pos)));
            pos = comma + 1;
        }
        if (values.empty()) throw Error(Errc::ConfigInvalid, "--sweep got no values");
        if (!csv_out.empty())
            throw Error(Errc::ConfigInvalid, "--csv needs a single run, not a sweep");
        auto reports = sim::run_sweep(cfg, axis, values);
        json arr = json::array();
        for (const auto& r : reports) arr.push_back(r);
        return write_text(out, arr.dump(2) + "\n");
    }

    sim::SimResult res = sim::run_simulation_full(cfg);
    if (!csv_out.empty()) {
        if (int rc = write_text(csv_out, sim::series_to_csv(res.series))) return rc;
    }
    return write_text(out, json(res.report).dump(2) + "\n");
}

struct ReportKey {
    int n_nodes;
    double delta;
    double rate;
    bool operator<(const ReportKey& o) const {
        return std::tie(n_nodes, delta, rate) < std::tie(o.n_nodes, o.delta, o.rate);
    }
};

int cmd_report(const std::vector<std::string>& files, bool csv) {
    std::vector<sim::SimReport> reports;
    for (const auto& f : files) {
        std::ifstream in(f);
        if (!in) {
            std::cerr << "cannot read " << f << "\n";
            return 1;
        }
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            std::cerr << f << ": " << e.what() << "\n";
            return 1;
        }
        try {
            if (j.is_array())
                for (const auto& item : j) reports.push_back(item.get<sim::SimReport>());
            else
                reports.push_back(j.get<sim::SimReport>());
        } catch (const Error& e) {
            std::cerr << f << ": " << e.what() << "\n";
            return 1;
        }
    }

    if (csv) {
        std::printf("mode,n_nodes,delta_seconds,client_rate,rs_rps_mean,amplification_predicted,"
                    "amplification_measured,rs_drops,consensus_converged\n");
        for (const auto& r : reports)
            std::printf("%s,%d,%g,%g,%.4f,%.4f,%.4f,%llu,%d\n", sim::mode_name(r.mode), r.n_nodes,
                        r.delta_seconds, r.client_rate, r.rs_rps_mean, r.amplification_predicted,
                        r.amplification_measured, (unsigned long long)r.rs_drops,
                        (int)r.consensus_converged);
    } else {
        std::printf("%-9s %7s %7s %6s %12s %10s %10s %9s %6s\n", "mode", "nodes", "delta", "rate",
                    "rs_rps", "predicted", "measured", "drops", "conv");
        for (const auto& r : reports)
            std::printf("%-9s %7d %7.2f %6.1f %12.2f %10.2f %10.2f %9llu %6s\n",
                        sim::mode_name(r.mode), r.n_nodes, r.delta_seconds, r.client_rate,
                        r.rs_rps_mean, r.amplification_predicted, r.amplification_measured,
                        (unsigned long long)r.rs_drops, r.consensus_converged ? "yes" : "no");
    }

    // amplification ratio wherever one workload was run under both architectures
    std::map<ReportKey, std::pair<std::optional<double>, std::optional<double>>> pairs;
    for (const auto& r : reports) {
        auto& slot = pairs[{r.n_nodes, r.delta_seconds, r.client_rate}];
        if (r.mode == sim::Mode::Legacy)
            slot.first = r.rs_rps_mean;
        else
            slot.second = r.rs_rps_mean;
    }
    for (const auto& [key, slot] : pairs) {
        if (slot.first && slot.second && *slot.second > 0) {
            if (csv)
                std::printf("ratio,%d,%g,%g,%.2f\n", key.n_nodes, key.delta, key.rate,
                            *slot.first / *slot.second);
            else
                std::printf("legacy/proposed RS load at n=%d delta=%g rate=%g: %.1fx\n",
                            key.n_nodes, key.delta, key.rate, *slot.first / *slot.second);
        }
    }
    return 0;
}

int cmd_chain_export(const std::string& file, const std::string& out) {
    Chain chain = Chain::load(file);
    return write_text(out, chain.export_jsonl());
}

std::function<void()>* g_stop = nullptr;

int cmd_rs_serve(const std::string& host, int port, const std::string& dataset,
                 const std::string& mode_arg, const std::string& journal) {
    ValidationMode mode;
    if (mode_arg == "committed")
        mode = ValidationMode::Committed;
    else if (mode_arg == "dryrun")
        mode = ValidationMode::DryRun;
    else
        throw Error(Errc::ConfigInvalid, "--mode must be committed or dryrun");

    ChainParams params;
    params.pow_target = lenient_target();
    Chain chain(params);
    InProcessChainClient client(chain);
    DocumentStore store = journal.empty() ? DocumentStore() : DocumentStore(journal);
    KeyPair identity = random_keypair();
    ResourceServer rs(store, client, identity, mode);

    // the RS must exist on chain before it can submit validations
    std::mt19937_64 rng(0xd0c5);
    chain.submit(make_signed_tx(identity, 1, RegisterPayload{0}));
    Block b = chain.mine_block(16, rng, 1);
    if (!chain.validate_block(b)) throw Error(Errc::InvalidTransaction, "bootstrap block rejected");
    if (!dataset.empty()) store.ingest_file(dataset);

    auto srv = http::start_server(rs, host, port);
    std::cout << "resource server on " << host << ":" << srv->port << "\n"
              << "rs address " << rs.address().hex() << "\n"
              << "documents " << store.size() << ", mode " << mode_arg << "\n"
              << "ctrl-c to stop\n";

    std::function<void()> stop = [&] { srv->svr.stop(); };
    g_stop = &stop;
    std::signal(SIGINT, [](int) {
        if (g_stop) (*g_stop)();
    });
    if (srv->th.joinable()) srv->th.join();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    ensure_sodium();
    CLI::App app{"proof-of-permission chain, simulator and resource server"};
    app.require_subcommand(1);

    // keygen
    auto* keygen = app.add_subcommand("keygen", "derive or generate an Ed25519 identity");
    std::string seed_arg;
    keygen->add_option("--seed", seed_arg, "integer or hex seed for a deterministic key");

    // scenario run
    auto* scenario = app.add_subcommand("scenario", "scripted end-to-end runs");
    scenario->require_subcommand(1);
    auto* scn_run = scenario->add_subcommand("run", "execute a scenario file");
    std::string scn_file, transcript_out, chain_out;
    scn_run->add_option("file", scn_file, "scenario JSON")->required();
    scn_run->add_option("--transcript", transcript_out, "write the step transcript here");
    scn_run->add_option("--chain-out", chain_out, "write the resulting chain as JSON lines");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "run the network simulator");
    std::string sim_config, sweep, csv_out, sim_out, sim_mode;
    std::optional<int> opt_nodes, opt_buffer;
    std::optional<double> opt_delta, opt_rate, opt_duration, opt_rs_rate, opt_rs_timeout,
        opt_interval;
    std::optional<std::uint64_t> opt_seed;
    simulate->add_option("--config", sim_config, "JSON config file");
    simulate->add_option("--mode", sim_mode, "legacy or proposed");
    simulate->add_option("--nodes", opt_nodes, "full node count");
    simulate->add_option("--delta", opt_delta, "gossip delay bound, seconds");
    simulate->add_option("--rate", opt_rate, "client request rate, 1/s");
    simulate->add_option("--duration", opt_duration, "simulated seconds");
    simulate->add_option("--seed", opt_seed, "master seed");
    simulate->add_option("--rs-rate", opt_rs_rate, "RS service rate, 1/s");
    simulate->add_option("--rs-buffer", opt_buffer, "RS waiting room size");
    simulate->add_option("--rs-timeout", opt_rs_timeout, "RS queue timeout, seconds (0 off)");
    simulate->add_option("--block-interval", opt_interval, "mean block interval, seconds");
    simulate->add_option("--sweep", sweep, "axis=v1,v2,... (n_nodes, client_rate, rs_buffer, delta_seconds)");
    simulate->add_option("--csv", csv_out, "write a per-second time series CSV");
    simulate->add_option("--out", sim_out, "write report JSON here instead of stdout");

    // report
    auto* report = app.add_subcommand("report", "tabulate simulation reports");
    std::vector<std::string> report_files;
    bool report_csv = false;
    report->add_option("files", report_files, "report JSON files")->required();
    report->add_flag("--csv", report_csv, "CSV instead of a table");

    // chain export
    auto* chain_cmd = app.add_subcommand("chain", "chain file utilities");
    chain_cmd->require_subcommand(1);
    auto* chain_export = chain_cmd->add_subcommand("export", "binary chain file to JSON lines");
    std::string chain_file, chain_export_out;
    chain_export->add_option("file", chain_file, "chain file written by a scenario run")->required();
    chain_export->add_option("--out", chain_export_out, "output path (default stdout)");

    // rs serve
    auto* rs_cmd = app.add_subcommand("rs", "resource server");
    rs_cmd->require_subcommand(1);
    auto* rs_serve = rs_cmd->add_subcommand("serve", "serve the document API over HTTP");
    std::string rs_host = "127.0.0.1", rs_dataset, rs_mode = "committed", rs_journal;
    int rs_port = 8080;
    rs_serve->add_option("--host", rs_host, "bind host");
    rs_serve->add_option("--port", rs_port, "bind port (0 for ephemeral)");
    rs_serve->add_option("--dataset", rs_dataset, "JSON array of documents to ingest");
    rs_serve->add_option("--mode", rs_mode, "committed or dryrun");
    rs_serve->add_option("--journal", rs_journal, "append-only document journal path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (keygen->parsed()) return cmd_keygen(seed_arg);
        if (scn_run->parsed()) return cmd_scenario_run(scn_file, transcript_out, chain_out);
        if (simulate->parsed()) {
            sim::SimConfig cfg = load_sim_config(sim_config);
            if (!sim_mode.empty()) cfg.mode = sim::mode_from_string(sim_mode);
            if (opt_nodes) cfg.n_nodes = *opt_nodes;
            if (opt_delta) cfg.delta_seconds = *opt_delta;
            if (opt_rate) cfg.client_rate = *opt_rate;
            if (opt_duration) cfg.duration_seconds = *opt_duration;
            if (opt_seed) cfg.seed = *opt_seed;
            if (opt_rs_rate) cfg.rs_service_rate = *opt_rs_rate;
            if (opt_buffer) cfg.rs_buffer = *opt_buffer;
            if (opt_rs_timeout) cfg.rs_timeout_seconds = *opt_rs_timeout;
            if (opt_interval) cfg.block_interval_seconds = *opt_interval;
            cfg.validate();
            return cmd_simulate(cfg, sweep, csv_out, sim_out);
        }
        if (report->parsed()) return cmd_report(report_files, report_csv);
        if (chain_export->parsed()) return cmd_chain_export(chain_file, chain_export_out);
        if (rs_serve->parsed()) return cmd_rs_serve(rs_host, rs_port, rs_dataset, rs_mode, rs_journal);
    } catch (const Error& e) {
        std::cerr << "error (" << errc_name(e.code()) << "): " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

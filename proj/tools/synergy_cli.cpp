// Command-line front end for the synergy toolkit. Everything goes through
// the C API in synergy/capi.h; this file only parses flags and writes files.

#include "synergy/capi.h"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace {

int exit_code_for(syn_status status) {
    switch (status) {
        case SYN_OK: return 0;
        case SYN_ERR_CONFIG:
        case SYN_ERR_INVALID_ARGUMENT: return 2;
        case SYN_ERR_TRANSPORT: return 3;
        case SYN_ERR_DATA:
        case SYN_ERR_PARSE:
        case SYN_ERR_NOT_FOUND: return 4;
        case SYN_ERR_INTERNAL: return 1;
    }
    return 1;
}

void check(syn_status status) {
    if (status != SYN_OK) {
        std::cerr << "error: " << syn_last_error() << "\n";
        std::exit(exit_code_for(status));
    }
}

using ConfigPtr = std::unique_ptr<syn_config, decltype(&syn_config_free)>;

ConfigPtr load_config(const std::string& path) {
    syn_config* cfg = nullptr;
    check(syn_config_load(path.c_str(), &cfg));
    return ConfigPtr(cfg, &syn_config_free);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "error: cannot write " << path << "\n";
        std::exit(4);
    }
    out << content;
}

void set_if(syn_config* cfg, const char* key, const std::string& value) {
    if (!value.empty()) check(syn_config_set(cfg, key, value.c_str()));
}

volatile std::sig_atomic_t g_interrupted = 0;

void wait_for_interrupt() {
    std::signal(SIGINT, [](int) { g_interrupted = 1; });
    std::signal(SIGTERM, [](int) { g_interrupted = 1; });
    while (!g_interrupted) {
        timespec ts{0, 100 * 1000 * 1000};
        nanosleep(&ts, nullptr);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cloud-edge LLM serving toolkit: cost model, latency simulator, "
                 "prompt services and network-management pipelines"};
    app.require_subcommand(1);
    app.fallthrough(); // parent --config/--out may follow the subcommand

    std::string config_path = "configs/defaults.paper.conf";
    std::string out_dir = "out";
    app.add_option("--config", config_path, "config file (key = value sections)")
        ->envname("SYNERGY_CONFIG");
    app.add_option("--out", out_dir, "output directory for report files");

    auto* cost = app.add_subcommand("cost", "deployment cost and transfer comparison");
    std::string cost_framework = "all";
    cost->add_option("--framework", cost_framework, "cloud-only|offload|splitting|synergy|all");

    auto* simulate = app.add_subcommand("simulate", "discrete-event latency simulation");
    std::string sim_framework = "synergy";
    std::string sim_n, sim_seed;
    simulate->add_option("--framework", sim_framework, "cloud-only|offload|splitting|synergy|all");
    simulate->add_option("--n", sim_n, "override sim.n_requests");
    simulate->add_option("--seed", sim_seed, "override sim.rng_seed");

    auto* serve = app.add_subcommand("serve", "run the edge or cloud service until interrupted");
    std::string serve_role;
    std::string serve_listen, serve_backend, serve_cloud, serve_metrics, serve_profiles;
    serve->add_option("role", serve_role, "edge|cloud")->required();
    serve->add_option("--listen", serve_listen, "listen address host:port");
    serve->add_option("--backend", serve_backend, "mock|replay|http");
    serve->add_option("--cloud", serve_cloud, "cloud address (edge role)");
    serve->add_option("--metrics-listen", serve_metrics, "metrics address (edge role)");
    serve->add_option("--profiles", serve_profiles, "profile directory or 'builtin' (edge role)");

    auto* client = app.add_subcommand("client", "send a file of prompts and print responses");
    std::string client_connect = "127.0.0.1:7401";
    std::string client_send, client_bs = "bs-0001";
    double client_timeout = 10.0;
    client->add_option("--connect", client_connect, "edge address host:port");
    client->add_option("--send", client_send, "file with one concise prompt per line")->required();
    client->add_option("--bs", client_bs, "originating base-station id");
    client->add_option("--timeout", client_timeout, "response timeout in seconds");

    auto* popularity = app.add_subcommand("popularity", "interval bucketing and baseline scoring");
    std::string pop_csv;
    std::string pop_hours, pop_top, pop_split, pop_method;
    popularity->add_option("--csv", pop_csv, "viewing records csv")->required();
    popularity->add_option("--interval-hours", pop_hours, "interval length in hours");
    popularity->add_option("--top", pop_top, "number of titles to track");
    popularity->add_option("--split", pop_split, "train fraction (chronological split)");
    popularity->add_option("--method", pop_method, "frequency|markov1|both");

    auto* intent = app.add_subcommand("intent", "keyword extraction scoring");
    std::string intent_dataset, intent_extractor = "rules";
    intent->add_option("--dataset", intent_dataset, "utterance TAB slot:value dataset")->required();
    intent->add_option("--extractor", intent_extractor, "rules|backend");

    auto* gen = app.add_subcommand("gen", "write synthetic datasets");
    std::string gen_kind, gen_out, gen_dir = "configs/profiles";
    std::uint64_t gen_n = 4000, gen_seed = 7;
    gen->add_option("kind", gen_kind, "viewing|intents|corpus|profiles")->required();
    gen->add_option("--out-file", gen_out, "output file (viewing/intents/corpus)");
    gen->add_option("--dir", gen_dir, "output directory (profiles)");
    gen->add_option("--n", gen_n, "number of records/samples");
    gen->add_option("--seed", gen_seed, "generator seed");

    CLI11_PARSE(app, argc, argv);
    const std::filesystem::path out(out_dir);

    if (*cost) {
        ConfigPtr cfg = load_config(config_path);
        syn_cost_report* report = nullptr;
        check(syn_cost_run(cfg.get(), cost_framework.c_str(), &report));
        std::cout << syn_cost_report_text(report);
        write_file(out / "cost_report.txt", syn_cost_report_text(report));
        write_file(out / "cost_report.kv", syn_cost_report_kv(report));
        syn_cost_report_free(report);
        return 0;
    }

    if (*simulate) {
        ConfigPtr cfg = load_config(config_path);
        set_if(cfg.get(), "sim.n_requests", sim_n);
        set_if(cfg.get(), "sim.rng_seed", sim_seed);
        if (sim_framework == "all") {
            syn_text* table = nullptr;
            check(syn_sim_compare(cfg.get(), &table));
            std::cout << syn_text_str(table);
            write_file(out / "comparison.txt", syn_text_str(table));
            syn_text_free(table);
            return 0;
        }
        syn_sim_trace* trace = nullptr;
        check(syn_simulate(cfg.get(), sim_framework.c_str(), &trace));
        std::cout << syn_sim_trace_summary_kv(trace);
        write_file(out / ("trace_" + sim_framework + ".log"), syn_sim_trace_document(trace));
        write_file(out / ("summary_" + sim_framework + ".kv"), syn_sim_trace_summary_kv(trace));
        syn_sim_trace_free(trace);
        return 0;
    }

    if (*serve) {
        ConfigPtr cfg = load_config(config_path);
        syn_server* server = nullptr;
        if (serve_role == "edge") {
            set_if(cfg.get(), "edge.listen", serve_listen);
            set_if(cfg.get(), "edge.backend", serve_backend);
            set_if(cfg.get(), "edge.cloud", serve_cloud);
            set_if(cfg.get(), "edge.metrics_listen", serve_metrics);
            set_if(cfg.get(), "edge.profile_dir", serve_profiles);
            check(syn_edge_server_start(cfg.get(), &server));
            std::cout << "edge listening on port " << syn_server_port(server) << ", metrics on "
                      << syn_server_metrics_port(server) << std::endl;
        } else if (serve_role == "cloud") {
            set_if(cfg.get(), "cloud.listen", serve_listen);
            set_if(cfg.get(), "cloud.backend", serve_backend);
            check(syn_cloud_server_start(cfg.get(), &server));
            std::cout << "cloud listening on port " << syn_server_port(server) << std::endl;
        } else {
            std::cerr << "error: role must be edge or cloud\n";
            return 2;
        }
        wait_for_interrupt();
        syn_server_stop(server);
        syn_server_free(server);
        return 0;
    }

    if (*client) {
        std::ifstream in(client_send, std::ios::binary);
        if (!in) {
            std::cerr << "error: cannot open prompt file '" << client_send << "'\n";
            return 4;
        }
        std::vector<std::string> prompts;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) prompts.push_back(line);
        }
        std::vector<const char*> raw;
        raw.reserve(prompts.size());
        for (const auto& p : prompts) raw.push_back(p.c_str());

        const std::size_t colon = client_connect.rfind(':');
        if (colon == std::string::npos) {
            std::cerr << "error: --connect expects host:port\n";
            return 2;
        }
        const std::string host = client_connect.substr(0, colon);
        const int port = std::atoi(client_connect.c_str() + colon + 1);

        syn_responses* responses = nullptr;
        check(syn_client_send(host.c_str(), static_cast<uint16_t>(port), client_bs.c_str(),
                              raw.data(), raw.size(), client_timeout, &responses));
        std::string doc;
        for (std::size_t i = 0; i < syn_responses_count(responses); ++i) {
            doc += "--- r-" + std::to_string(i) +
                   (syn_responses_terminated_at_edge(responses, i) ? " [edge]" : "") + "\n";
            doc += syn_responses_text(responses, i);
            doc += "\n";
        }
        std::cout << doc;
        write_file(out / "responses.txt", doc);
        syn_responses_free(responses);
        return 0;
    }

    if (*popularity) {
        ConfigPtr cfg = load_config(config_path);
        set_if(cfg.get(), "netmgmt.interval_hours", pop_hours);
        set_if(cfg.get(), "netmgmt.top_k", pop_top);
        set_if(cfg.get(), "netmgmt.split_ratio", pop_split);
        set_if(cfg.get(), "netmgmt.method", pop_method);
        syn_report* report = nullptr;
        check(syn_popularity_run(cfg.get(), pop_csv.c_str(), &report));
        std::cout << syn_report_text(report);
        write_file(out / "popularity_report.txt", syn_report_text(report));
        write_file(out / "popularity_report.kv", syn_report_kv(report));
        syn_report_free(report);
        return 0;
    }

    if (*intent) {
        ConfigPtr cfg = load_config(config_path);
        syn_report* report = nullptr;
        check(syn_intent_run(cfg.get(), intent_dataset.c_str(), intent_extractor.c_str(), &report));
        std::cout << syn_report_text(report);
        write_file(out / "intent_report.txt", syn_report_text(report));
        write_file(out / "intent_report.kv", syn_report_kv(report));
        syn_report_free(report);
        return 0;
    }

    if (*gen) {
        if (gen_kind == "profiles") {
            check(syn_write_profiles(gen_dir.c_str()));
            std::cout << "wrote profiles to " << gen_dir << "\n";
            return 0;
        }
        if (gen_out.empty()) {
            std::cerr << "error: --out-file is required for gen " << gen_kind << "\n";
            return 2;
        }
        if (gen_kind == "viewing") {
            check(syn_generate_viewing_csv(gen_out.c_str(), gen_n, gen_seed));
        } else if (gen_kind == "intents") {
            check(syn_generate_intent_dataset(gen_out.c_str(), gen_n, gen_seed));
        } else if (gen_kind == "corpus") {
            check(syn_generate_finetune_corpus(gen_out.c_str(), gen_n, gen_seed));
        } else {
            std::cerr << "error: unknown gen kind '" << gen_kind << "'\n";
            return 2;
        }
        std::cout << "wrote " << gen_n << " records to " << gen_out << "\n";
        return 0;
    }

    return 0;
}

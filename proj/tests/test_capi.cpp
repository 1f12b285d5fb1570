#include "synergy/capi.h"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

TEST_CASE("c api: version and error plumbing") {
    CHECK(std::string(syn_version()) == "0.1.0");
    syn_config* cfg = nullptr;
    CHECK(syn_config_load("/nonexistent/nope.conf", &cfg) == SYN_ERR_CONFIG);
    CHECK(std::strlen(syn_last_error()) > 0);
    CHECK(syn_config_load(nullptr, &cfg) == SYN_ERR_INVALID_ARGUMENT);
}

TEST_CASE("c api: config load, set, get") {
    syn_config* cfg = nullptr;
    REQUIRE(syn_config_parse("[sim]\nn_requests = 10\n", &cfg) == SYN_OK);
    char buf[64];
    REQUIRE(syn_config_get(cfg, "sim.n_requests", buf, sizeof(buf)) == SYN_OK);
    CHECK(std::string(buf) == "10");
    CHECK(syn_config_get(cfg, "sim.missing", buf, sizeof(buf)) == SYN_ERR_NOT_FOUND);
    REQUIRE(syn_config_set(cfg, "sim.n_requests", "25") == SYN_OK);
    REQUIRE(syn_config_get(cfg, "sim.n_requests", buf, sizeof(buf)) == SYN_OK);
    CHECK(std::string(buf) == "25");
    syn_config_free(cfg);
}

TEST_CASE("c api: pure helpers") {
    double d = 0;
    REQUIRE(syn_split_ratio_d(4096, 32, 1, 12.0, &d) == SYN_OK);
    CHECK(d == doctest::Approx(10922.67).epsilon(1e-6));
    REQUIRE(syn_split_ratio_d(4096, 4, 0, 12.0, &d) == SYN_OK);
    CHECK(d == 4096.0 * 4.0 / 12.0);
    CHECK(syn_split_ratio_d(0, 32, 1, 12.0, &d) == SYN_ERR_INVALID_ARGUMENT);

    double latency = 0;
    REQUIRE(syn_transmission_latency(10000, 12, 1e9, 0.0, 1, &latency) == SYN_OK);
    CHECK(latency == doctest::Approx(0.96e-3).epsilon(1e-12));
}

TEST_CASE("c api: cost report over the shipped defaults") {
    syn_config* cfg = nullptr;
    REQUIRE(syn_config_load("configs/defaults.paper.conf", &cfg) == SYN_OK);

    syn_cost_report* report = nullptr;
    REQUIRE(syn_cost_run(cfg, "all", &report) == SYN_OK);
    REQUIRE(syn_cost_report_rows(report) == 4);
    CHECK(std::string(syn_cost_report_framework(report, 0)) == "cloud-only");
    CHECK(std::string(syn_cost_report_framework(report, 3)) == "synergy");

    double v = 0;
    REQUIRE(syn_cost_report_value(report, 3, SYN_COST_BYTES_PER_REQUEST, &v) == SYN_OK);
    CHECK(v == doctest::Approx(31.0).epsilon(1e-12));
    REQUIRE(syn_cost_report_value(report, 0, SYN_COST_BYTES_PER_REQUEST, &v) == SYN_OK);
    CHECK(v == 12.0);
    CHECK(syn_cost_report_split_ratio(report) == doctest::Approx(10922.67).epsilon(1e-6));

    const char* text = syn_cost_report_text(report);
    REQUIRE(text != nullptr);
    CHECK(std::string(text).find("10922") != std::string::npos);
    syn_cost_report_free(report);

    syn_cost_report* single = nullptr;
    REQUIRE(syn_cost_run(cfg, "offload", &single) == SYN_OK);
    CHECK(syn_cost_report_rows(single) == 1);
    syn_cost_report_free(single);

    CHECK(syn_cost_run(cfg, "nonsense", &single) == SYN_ERR_INVALID_ARGUMENT);
    syn_config_free(cfg);
}

TEST_CASE("c api: simulation handles and determinism") {
    syn_config* cfg = nullptr;
    REQUIRE(syn_config_load("configs/defaults.paper.conf", &cfg) == SYN_OK);

    syn_sim_trace* a = nullptr;
    syn_sim_trace* b = nullptr;
    REQUIRE(syn_simulate(cfg, "synergy", &a) == SYN_OK);
    REQUIRE(syn_simulate(cfg, "synergy", &b) == SYN_OK);
    CHECK(std::abs(syn_sim_trace_end_to_end_s(a) - 3.35) / 3.35 < 0.01);
    CHECK(std::string(syn_sim_trace_document(a)) == syn_sim_trace_document(b));
    CHECK(syn_sim_trace_events(a) > 0);
    CHECK(std::string(syn_sim_trace_summary_kv(a)).find("dedup_hits=") != std::string::npos);
    syn_sim_trace_free(a);
    syn_sim_trace_free(b);

    syn_text* table = nullptr;
    REQUIRE(syn_sim_compare(cfg, &table) == SYN_OK);
    CHECK(std::string(syn_text_str(table)).find("synergy") != std::string::npos);
    syn_text_free(table);

    REQUIRE(syn_config_set(cfg, "sim.cloud_batch_speedup", "0.25") == SYN_OK);
    syn_sim_trace* bad = nullptr;
    CHECK(syn_simulate(cfg, "synergy", &bad) == SYN_ERR_INVALID_ARGUMENT);
    syn_config_free(cfg);
}

TEST_CASE("c api: lora params from config") {
    syn_config* cfg = nullptr;
    REQUIRE(syn_config_load("configs/defaults.paper.conf", &cfg) == SYN_OK);
    uint64_t params = 0;
    REQUIRE(syn_lora_adapter_params(cfg, "llama-7b", 8, &params) == SYN_OK);
    CHECK(params == 8'388'608ull);
    CHECK(syn_lora_adapter_params(cfg, "llama-7b", 5000, &params) == SYN_ERR_INVALID_ARGUMENT);
    CHECK(syn_lora_adapter_params(cfg, "missing-model", 8, &params) == SYN_ERR_CONFIG);
    syn_config_free(cfg);
}

TEST_CASE("c api: end-to-end services and client") {
    syn_config* cfg = nullptr;
    REQUIRE(syn_config_parse(R"(
[edge]
listen = 127.0.0.1:0
metrics_listen = 127.0.0.1:0
batch_window_s = 0.01
max_batch = 8
profile_dir = builtin
[cloud]
listen = 127.0.0.1:0
[backend.mock]
seed = 1
)", &cfg) == SYN_OK);

    syn_server* cloud = nullptr;
    REQUIRE(syn_cloud_server_start(cfg, &cloud) == SYN_OK);
    const uint16_t cloud_port = syn_server_port(cloud);
    REQUIRE(cloud_port != 0);

    REQUIRE(syn_config_set(cfg, "edge.cloud",
                           ("127.0.0.1:" + std::to_string(cloud_port)).c_str()) == SYN_OK);
    syn_server* edge = nullptr;
    REQUIRE(syn_edge_server_start(cfg, &edge) == SYN_OK);
    const uint16_t edge_port = syn_server_port(edge);
    REQUIRE(edge_port != 0);
    CHECK(syn_server_metrics_port(edge) != 0);

    const char* prompts[] = {"best libraries", "best libraries", "night buses"};
    syn_responses* responses = nullptr;
    REQUIRE(syn_client_send("127.0.0.1", edge_port, "bs-0001", prompts, 3, 10.0, &responses) ==
            SYN_OK);
    REQUIRE(syn_responses_count(responses) == 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(std::strlen(syn_responses_text(responses, i)) > 0);
    }
    CHECK(std::string(syn_responses_text(responses, 0)) == syn_responses_text(responses, 1));
    syn_responses_free(responses);

    syn_text* metrics = nullptr;
    REQUIRE(syn_server_metrics(edge, &metrics) == SYN_OK);
    CHECK(std::string(syn_text_str(metrics)).find("dedup_hits 1") != std::string::npos);
    syn_text_free(metrics);

    // Client against a dead port is a transport error.
    syn_responses* nothing = nullptr;
    CHECK(syn_client_send("127.0.0.1", 1, "bs-0001", prompts, 3, 0.5, &nothing) ==
          SYN_ERR_TRANSPORT);

    syn_server_stop(edge);
    syn_server_free(edge);
    syn_server_stop(cloud);
    syn_server_free(cloud);
    syn_config_free(cfg);
}

TEST_CASE("c api: netmgmt pipelines") {
    syn_config* cfg = nullptr;
    REQUIRE(syn_config_load("configs/defaults.paper.conf", &cfg) == SYN_OK);

    REQUIRE(syn_generate_viewing_csv("/tmp/synergy_capi_viewing.csv", 4000, 7) == SYN_OK);
    REQUIRE(syn_config_set(cfg, "netmgmt.window_days", "40") == SYN_OK);
    syn_report* pop = nullptr;
    REQUIRE(syn_popularity_run(cfg, "/tmp/synergy_capi_viewing.csv", &pop) == SYN_OK);
    double acc = 0;
    REQUIRE(syn_report_metric(pop, "frequency_accuracy", &acc) == SYN_OK);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    REQUIRE(syn_report_metric(pop, "markov1_accuracy", &acc) == SYN_OK);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    CHECK(syn_report_metric(pop, "unknown", &acc) == SYN_ERR_NOT_FOUND);
    syn_report_free(pop);

    REQUIRE(syn_generate_intent_dataset("/tmp/synergy_capi_intents.tsv", 200, 7) == SYN_OK);
    syn_report* intent = nullptr;
    REQUIRE(syn_intent_run(cfg, "/tmp/synergy_capi_intents.tsv", "rules", &intent) == SYN_OK);
    REQUIRE(syn_report_metric(intent, "exact_match", &acc) == SYN_OK);
    CHECK(acc > 0.95);
    syn_report_free(intent);

    CHECK(syn_intent_run(cfg, "/tmp/synergy_capi_intents.tsv", "nonsense", &intent) ==
          SYN_ERR_INVALID_ARGUMENT);
    syn_config_free(cfg);
}

TEST_CASE("c api: intent scoring through a replay backend hook") {
    // A replay corpus that answers each utterance with its gold pairs makes
    // the backend extractor score a perfect match; the mock (which answers
    // prose) scores zero. Same scorer both times.
    const std::string pairs =
        "bandwidth:10 Gbps\tsrc:Access 1\tdst:Cloud 2\tprotection:yes";
    {
        std::ofstream dataset("/tmp/synergy_capi_intent_gold.tsv");
        dataset << "establish a 10 Gbps connection from Access 1 to Cloud 2 with traffic "
                   "protection\t"
                << pairs << "\n";
        std::ofstream corpus("/tmp/synergy_capi_intent_corpus.tsv");
        corpus << "establish a 10 gbps connection from access 1 to cloud 2 with traffic "
                  "protection\t"
               << pairs << "\n";
    }
    syn_config* cfg = nullptr;
    REQUIRE(syn_config_parse("[netmgmt]\nintent_backend = replay\n[backend.replay]\n"
                             "corpus = /tmp/synergy_capi_intent_corpus.tsv\n",
                             &cfg) == SYN_OK);
    syn_report* report = nullptr;
    REQUIRE(syn_intent_run(cfg, "/tmp/synergy_capi_intent_gold.tsv", "backend", &report) ==
            SYN_OK);
    double exact = -1;
    REQUIRE(syn_report_metric(report, "exact_match", &exact) == SYN_OK);
    CHECK(exact == 1.0);
    syn_report_free(report);

    REQUIRE(syn_config_set(cfg, "netmgmt.intent_backend", "mock") == SYN_OK);
    REQUIRE(syn_intent_run(cfg, "/tmp/synergy_capi_intent_gold.tsv", "backend", &report) ==
            SYN_OK);
    REQUIRE(syn_report_metric(report, "exact_match", &exact) == SYN_OK);
    CHECK(exact == 0.0);
    syn_report_free(report);
    syn_config_free(cfg);
}

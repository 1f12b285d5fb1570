#include "synergy/cloud_node.hpp"
#include "synergy/edge_node.hpp"
#include "synergy/error.hpp"
#include "synergy/net.hpp"
#include "synergy/protocol.hpp"

#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <thread>

using namespace synergy;

namespace {

Config service_config(std::uint16_t cloud_port) {
    Config cfg = Config::from_string(R"(
[edge]
listen = 127.0.0.1:0
metrics_listen = 127.0.0.1:0
batch_window_s = 0.01
max_batch = 8
dedup_ttl_s = 60
dedup_capacity = 1024
terminate_threshold = 0.9
[cloud]
listen = 127.0.0.1:0
[backend.mock]
seed = 1
)");
    cfg.set("edge.cloud", "127.0.0.1:" + std::to_string(cloud_port));
    return cfg;
}

edge::ProfileStore builtin_store() {
    edge::ProfileStore store;
    for (const auto& p : edge::builtin_regions()) store.add(p);
    return store;
}

// Protocol-level client: sends concise prompts on one connection and
// collects one response per request id.
std::vector<proto::PromptEnvelope> send_prompts(std::uint16_t port,
                                                const std::vector<std::string>& prompts,
                                                const std::string& bs = "bs-0001") {
    net::Socket sock = net::connect_to("127.0.0.1", port, 5.0);
    std::string wire;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        wire += proto::encode(proto::make_envelope("q-" + std::to_string(i),
                                                   proto::Stage::Concise, prompts[i], bs, 0));
    }
    sock.send_all(wire);
    proto::FrameReader reader;
    std::vector<proto::PromptEnvelope> responses;
    char buf[8192];
    while (responses.size() < prompts.size()) {
        const std::size_t n = sock.recv_some(buf, sizeof(buf));
        REQUIRE(n > 0);
        for (auto& env : reader.feed(buf, n)) responses.push_back(std::move(env));
    }
    return responses;
}

} // namespace

TEST_CASE("edge and cloud serve a three-prompt loopback exchange") {
    cloud::CloudServiceConfig ccfg;
    ccfg.listen_host = "127.0.0.1";
    ccfg.listen_port = 0;
    ccfg.workflow = proto::workflow_from_config(Config::from_string(""));
    cloud::CloudService cloud_svc(ccfg, std::make_unique<backend::MockBackend>(1));

    Config cfg = service_config(cloud_svc.port());
    edge::EdgeService edge_svc(edge::edge_service_config_from(cfg), builtin_store(),
                               std::make_unique<backend::MockBackend>(1));

    const std::vector<std::string> prompts = {"best libraries", "harbor tours today",
                                              "famous parks"};
    const auto responses = send_prompts(edge_svc.port(), prompts);
    REQUIRE(responses.size() == 3);
    std::set<std::string> ids;
    for (const auto& env : responses) {
        CHECK(env.stage == proto::Stage::Response);
        CHECK(!env.text.empty());
        CHECK(env.text.rfind("error:", 0) != 0);
        ids.insert(env.request_id);
    }
    CHECK(ids.size() == 3);

    const edge::EdgeMetrics m = edge_svc.metrics();
    CHECK(m.requests == 3);

    edge_svc.stop();
    cloud_svc.stop();
}

TEST_CASE("duplicate prompts are absorbed and answered from one upstream result") {
    cloud::CloudServiceConfig ccfg;
    ccfg.listen_host = "127.0.0.1";
    ccfg.listen_port = 0;
    ccfg.workflow = proto::workflow_from_config(Config::from_string(""));
    cloud::CloudService cloud_svc(ccfg, std::make_unique<backend::MockBackend>(1));

    Config cfg = service_config(cloud_svc.port());
    edge::EdgeService edge_svc(edge::edge_service_config_from(cfg), builtin_store(),
                               std::make_unique<backend::MockBackend>(1));

    const std::vector<std::string> prompts = {"night buses", "Night  Buses?", "night buses",
                                              "food markets"};
    const auto responses = send_prompts(edge_svc.port(), prompts);
    REQUIRE(responses.size() == 4);
    // The duplicates answer with the same text as the original.
    std::map<std::string, std::string> by_id;
    for (const auto& env : responses) by_id[env.request_id] = env.text;
    CHECK(by_id["q-0"] == by_id["q-1"]);
    CHECK(by_id["q-0"] == by_id["q-2"]);
    CHECK(by_id["q-3"] != by_id["q-0"]);

    const edge::EdgeMetrics m = edge_svc.metrics();
    CHECK(m.requests == 4);
    CHECK(m.dedup_hits == 2);

    // Metrics endpoint serves the plain-text counters.
    const std::string metrics_text = net::fetch_text("127.0.0.1", edge_svc.metrics_port());
    CHECK(metrics_text.find("requests 4") != std::string::npos);
    CHECK(metrics_text.find("dedup_hits 2") != std::string::npos);

    edge_svc.stop();
    cloud_svc.stop();
}

TEST_CASE("unknown bs ids degrade to unpersonalized service") {
    cloud::CloudServiceConfig ccfg;
    ccfg.listen_host = "127.0.0.1";
    ccfg.listen_port = 0;
    ccfg.workflow = proto::workflow_from_config(Config::from_string(""));
    cloud::CloudService cloud_svc(ccfg, std::make_unique<backend::MockBackend>(1));

    Config cfg = service_config(cloud_svc.port());
    edge::EdgeService edge_svc(edge::edge_service_config_from(cfg), builtin_store(),
                               std::make_unique<backend::MockBackend>(1));

    const auto responses = send_prompts(edge_svc.port(), {"best libraries"}, "bs-unknown");
    REQUIRE(responses.size() == 1);
    CHECK(responses[0].stage == proto::Stage::Response);
    CHECK(edge_svc.metrics().unknown_bs == 1);

    edge_svc.stop();
    cloud_svc.stop();
}

TEST_CASE("edge answers per-envelope errors when the cloud is unreachable") {
    Config cfg = service_config(1); // port 1: connection refused
    edge::EdgeService edge_svc(edge::edge_service_config_from(cfg), builtin_store(),
                               std::make_unique<backend::MockBackend>(1));
    const auto responses = send_prompts(edge_svc.port(), {"best libraries", "famous parks"});
    REQUIRE(responses.size() == 2);
    for (const auto& env : responses) {
        CHECK(env.stage == proto::Stage::Response);
        CHECK(env.text.rfind("error:", 0) == 0);
    }
    edge_svc.stop();
}

TEST_CASE("connect_to a dead port raises a transport error") {
    CHECK_THROWS_AS(net::connect_to("127.0.0.1", 1, 0.5), Error);
    try {
        net::connect_to("127.0.0.1", 1, 0.5);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Transport);
    }
}

TEST_CASE("cloud service loads the adapter registry at startup") {
    Config cfg = Config::from_string(
        "[cloud]\nlisten = 127.0.0.1:0\nadapter_registry = configs/adapters.conf\n");
    cloud::CloudService svc(cloud::cloud_service_config_from(cfg),
                            std::make_unique<backend::MockBackend>(1));
    CHECK(svc.metrics().adapters == 1);
    svc.stop();

    Config bad = Config::from_string(
        "[cloud]\nlisten = 127.0.0.1:0\nadapter_registry = /nonexistent.conf\n");
    CHECK_THROWS_AS(cloud::CloudService(cloud::cloud_service_config_from(bad),
                                        std::make_unique<backend::MockBackend>(1)),
                    Error);
}

TEST_CASE("pipeline responses are identical under mock and replay backends") {
    const std::vector<std::string> prompts = {"best libraries", "night buses", "quiet cafes",
                                              "harbor tours"};
    const edge::ProfileStore store = builtin_store();

    // Record the mock's behavior for every backend call the pipeline can
    // make on these prompts, then replay it from corpus files.
    const std::string edge_corpus_path = "/tmp/synergy_sub_edge.tsv";
    const std::string cloud_corpus_path = "/tmp/synergy_sub_cloud.tsv";
    {
        backend::MockBackend mock(1);
        std::ofstream edge_corpus(edge_corpus_path);
        std::ofstream cloud_corpus(cloud_corpus_path);
        for (const auto& text : prompts) {
            const edge::LocationProfile* profile = store.find("bs-0001");
            REQUIRE(profile != nullptr);
            backend::GenerationRequest ereq;
            ereq.prompt = backend::compose_enhancement_prompt(text, profile->facts,
                                                              profile->max_facts_per_prompt);
            ereq.max_new_tokens = 128;
            const backend::GenerationResult er = mock.generate(ereq);
            edge_corpus << proto::normalize_for_dedup(ereq.prompt) << '\t' << er.text << '\t'
                        << er.confidence << '\n';
            // Responder-mode calls: edge termination and the cloud answer.
            backend::GenerationRequest rreq;
            rreq.prompt = er.text;
            const backend::GenerationResult rr = mock.generate(rreq);
            edge_corpus << proto::normalize_for_dedup(rreq.prompt) << '\t' << rr.text << '\t'
                        << rr.confidence << '\n';
            cloud_corpus << proto::normalize_for_dedup(rreq.prompt) << '\t' << rr.text << '\t'
                         << rr.confidence << '\n';
        }
    }

    const auto run_stack = [&](std::unique_ptr<backend::TextBackend> edge_backend,
                               std::unique_ptr<backend::TextBackend> cloud_backend) {
        cloud::CloudServiceConfig ccfg;
        ccfg.listen_host = "127.0.0.1";
        ccfg.listen_port = 0;
        ccfg.workflow = proto::workflow_from_config(Config::from_string(""));
        cloud::CloudService cloud_svc(ccfg, std::move(cloud_backend));
        Config cfg = service_config(cloud_svc.port());
        edge::EdgeService edge_svc(edge::edge_service_config_from(cfg), builtin_store(),
                                   std::move(edge_backend));
        std::map<std::string, std::string> by_id;
        for (const auto& env : send_prompts(edge_svc.port(), prompts)) {
            by_id[env.request_id] = env.text;
        }
        edge_svc.stop();
        cloud_svc.stop();
        return by_id;
    };

    const auto mock_run = run_stack(std::make_unique<backend::MockBackend>(1),
                                    std::make_unique<backend::MockBackend>(1));
    const auto replay_run = run_stack(
        std::make_unique<backend::ReplayBackend>(
            backend::ReplayBackend::from_file(edge_corpus_path)),
        std::make_unique<backend::ReplayBackend>(
            backend::ReplayBackend::from_file(cloud_corpus_path)));
    REQUIRE(mock_run.size() == prompts.size());
    CHECK(mock_run == replay_run);
    std::filesystem::remove(edge_corpus_path);
    std::filesystem::remove(cloud_corpus_path);
}

TEST_CASE("cloud service answers error responses for wrong-stage envelopes") {
    cloud::CloudServiceConfig ccfg;
    ccfg.listen_host = "127.0.0.1";
    ccfg.listen_port = 0;
    ccfg.workflow = proto::workflow_from_config(Config::from_string(""));
    cloud::CloudService cloud_svc(ccfg, std::make_unique<backend::MockBackend>(1));

    net::Socket sock = net::connect_to("127.0.0.1", cloud_svc.port(), 5.0);
    sock.send_all(proto::encode(
        proto::make_envelope("w-1", proto::Stage::Concise, "raw concise", "bs", 0)));
    proto::FrameReader reader;
    char buf[4096];
    std::vector<proto::PromptEnvelope> responses;
    while (responses.empty()) {
        const std::size_t n = sock.recv_some(buf, sizeof(buf));
        REQUIRE(n > 0);
        for (auto& env : reader.feed(buf, n)) responses.push_back(std::move(env));
    }
    CHECK(responses[0].text.rfind("error:", 0) == 0);
    cloud_svc.stop();
}

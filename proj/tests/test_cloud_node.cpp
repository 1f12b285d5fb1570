#include "synergy/cloud_node.hpp"
#include "synergy/cost_model.hpp"
#include "synergy/error.hpp"

#include <doctest.h>

#include <set>

using namespace synergy;
using namespace synergy::cloud;

namespace {

proto::PromptEnvelope comprehensive(const std::string& text, const std::string& rid) {
    return proto::make_envelope(rid, proto::Stage::Comprehensive, text, "bs-0001", 0);
}

struct EchoBackend : backend::TextBackend {
    int batch_calls = 0;
    bool fail = false;

    backend::GenerationResult generate(const backend::GenerationRequest& req) override {
        if (fail) throw_error(ErrorCode::Transport, "backend down");
        return {"echo: " + req.prompt, 1.0, 0.0};
    }
    std::vector<backend::GenerationResult> generate_batch(
        const std::vector<backend::GenerationRequest>& reqs) override {
        ++batch_calls;
        return TextBackend::generate_batch(reqs);
    }
    const char* name() const override { return "echo"; }
};

cost::ModelShape llama_shape() {
    cost::ModelShape s;
    s.name = "llama-7b";
    s.total_params = 6'700'000'000ull;
    s.num_layers = 32;
    s.hidden_dim = 4096;
    s.bytes_per_param = 2;
    s.applies_lora_to = {cost::LoraMatrixShape{4096, 4096, 4}};
    return s;
}

} // namespace

TEST_CASE("respond_batch echoes the comprehensive text") {
    EchoBackend echo;
    const auto out = respond_batch({comprehensive("tell me about parks", "r-1")}, echo);
    REQUIRE(out.size() == 1);
    CHECK(out[0].stage == proto::Stage::Response);
    CHECK(out[0].request_id == "r-1");
    CHECK(out[0].text.find("tell me about parks") != std::string::npos);
}

TEST_CASE("respond_batch preserves cardinality, ids and order") {
    EchoBackend echo;
    for (std::size_t k : {1u, 2u, 5u, 20u, 64u}) {
        std::vector<proto::PromptEnvelope> batch;
        for (std::size_t i = 0; i < k; ++i) {
            batch.push_back(comprehensive("prompt " + std::to_string(i), "id-" + std::to_string(i)));
        }
        const auto out = respond_batch(batch, echo);
        REQUIRE(out.size() == k);
        std::set<std::string> ids;
        for (std::size_t i = 0; i < k; ++i) {
            CHECK(out[i].request_id == batch[i].request_id); // order preserved
            ids.insert(out[i].request_id);
        }
        CHECK(ids.size() == k); // bijective
    }
}

TEST_CASE("respond_batch invokes the backend once per batch") {
    EchoBackend echo;
    std::vector<proto::PromptEnvelope> batch;
    for (int i = 0; i < 12; ++i) {
        batch.push_back(comprehensive("p" + std::to_string(i), "r" + std::to_string(i)));
    }
    respond_batch(batch, echo);
    CHECK(echo.batch_calls == 1);
}

TEST_CASE("deterministic backends give identical responses for identical batches") {
    backend::MockBackend mock(42);
    std::vector<proto::PromptEnvelope> batch = {comprehensive("quiet cafes nearby", "a"),
                                                comprehensive("harbor tours today", "b")};
    const auto first = respond_batch(batch, mock);
    const auto second = respond_batch(batch, mock);
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) CHECK(first[i].text == second[i].text);
}

TEST_CASE("backend failure yields error responses, not drops") {
    EchoBackend broken;
    broken.fail = true;
    std::vector<proto::PromptEnvelope> batch = {comprehensive("a", "r-1"),
                                                comprehensive("b", "r-2")};
    const auto out = respond_batch(batch, broken);
    REQUIRE(out.size() == 2);
    for (const auto& env : out) {
        CHECK(env.stage == proto::Stage::Response);
        CHECK(env.text.rfind("error:", 0) == 0);
    }
    CHECK(out[0].request_id == "r-1");
    CHECK(out[1].request_id == "r-2");
}

TEST_CASE("respond_batch validates stages and rejects empty batches") {
    EchoBackend echo;
    CHECK_THROWS_AS(respond_batch({}, echo), Error);
    const auto wrong = proto::make_envelope("r", proto::Stage::Concise, "x", "bs", 0);
    CHECK_THROWS_AS(respond_batch({wrong}, echo), Error);
}

TEST_CASE("adapter registry validates size against the adapter arithmetic") {
    AdapterRegistry registry({{"llama-7b", llama_shape()}});

    AdapterRecord rec;
    rec.adapter_id = "assist-v1";
    rec.base_model = "llama-7b";
    rec.rank = 8;
    rec.scale_factor = 16.0;
    rec.size_bytes = static_cast<std::uint64_t>(
        cost::lora_adapter_storage_bytes(llama_shape(), cost::LoraConfig{8, 16.0}));
    CHECK_NOTHROW(registry.register_adapter(rec));
    CHECK(registry.find("assist-v1") != nullptr);

    // Duplicate id.
    CHECK_THROWS_WITH_AS(registry.register_adapter(rec), doctest::Contains("already"), Error);

    // Rank 0.
    AdapterRecord zero = rec;
    zero.adapter_id = "zero";
    zero.rank = 0;
    CHECK_THROWS_AS(registry.register_adapter(zero), Error);

    // Size off by more than 1%: the message cites the expected size.
    AdapterRecord off = rec;
    off.adapter_id = "off";
    off.size_bytes = rec.size_bytes + rec.size_bytes / 50;
    CHECK_THROWS_WITH_AS(registry.register_adapter(off),
                         doctest::Contains(std::to_string(rec.size_bytes).c_str()), Error);

    // Within 1% passes.
    AdapterRecord close = rec;
    close.adapter_id = "close";
    close.size_bytes = rec.size_bytes + rec.size_bytes / 200;
    CHECK_NOTHROW(registry.register_adapter(close));
}

TEST_CASE("adapter registry loads from config") {
    const std::string text = R"(
[model.llama-7b]
total_params = 6700000000
num_layers = 32
hidden_dim = 4096
bytes_per_param = 2
lora.0 = 4096x4096x4

[adapter.assist-v1]
base_model = llama-7b
rank = 8
scale_factor = 16
size_bytes = 33554432
)";
    const AdapterRegistry registry = AdapterRegistry::from_config(Config::from_string(text));
    REQUIRE(registry.find("assist-v1") != nullptr);
    CHECK(registry.find("assist-v1")->rank == 8);
    CHECK(registry.list() == std::vector<std::string>{"assist-v1"});
}

#include "synergy/config.hpp"
#include "synergy/cost_model.hpp"
#include "synergy/error.hpp"
#include "synergy/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace synergy;
using namespace synergy::cost;

namespace {

ModelShape single_matrix_shape(std::uint64_t d_in, std::uint64_t d_out,
                               std::uint32_t layers = 1, std::uint64_t instances = 1) {
    ModelShape s;
    s.name = "test";
    s.total_params = d_in * d_out;
    s.num_layers = layers;
    s.hidden_dim = static_cast<std::uint32_t>(d_in);
    s.bytes_per_param = 2;
    s.applies_lora_to = {LoraMatrixShape{d_in, d_out, instances}};
    return s;
}

// Independent accumulation, one adapted matrix instance at a time.
std::uint64_t brute_force_adapter_params(const ModelShape& shape, std::uint32_t rank) {
    std::uint64_t total = 0;
    for (const auto& m : shape.applies_lora_to) {
        for (std::uint32_t layer = 0; layer < shape.num_layers; ++layer) {
            for (std::uint64_t inst = 0; inst < m.instances_per_layer; ++inst) {
                total += rank * m.d_in + rank * m.d_out; // A is d_in x r, B is r x d_out
            }
        }
    }
    return total;
}

ModelShape default_llama_shape() {
    ModelShape s;
    s.name = "llama-7b";
    s.total_params = 6'700'000'000ull;
    s.num_layers = 32;
    s.hidden_dim = 4096;
    s.bytes_per_param = 2;
    s.applies_lora_to = {LoraMatrixShape{4096, 4096, 4}};
    return s;
}

CostParams default_params() {
    CostParams p;
    p.lora = {8, 16.0};
    p.factors = {4.125, 8.3582089552238806, 2.0895522388059701};
    p.links.end_edge = {1e9, 0.0};
    p.links.edge_cloud = {1e9, 0.0};
    p.workload_n = 10000;
    p.split_datum = {32, DatumUnit::Bits};
    p.avg_input_bytes = 12.0;
    return p;
}

ModelShape default_gpt2_shape() {
    ModelShape s;
    s.name = "gpt2-base";
    s.total_params = 100'000'000ull;
    s.num_layers = 12;
    s.hidden_dim = 768;
    s.bytes_per_param = 4;
    s.applies_lora_to = {LoraMatrixShape{768, 768, 4}};
    return s;
}

} // namespace

TEST_CASE("lora adapter params match the rank formula") {
    const ModelShape shape = single_matrix_shape(4096, 4096);
    CHECK(lora_adapter_params(shape, LoraConfig{8, 16.0}) == 65536);
    CHECK(lora_adapter_params(shape, LoraConfig{8, 16.0}) ==
          brute_force_adapter_params(shape, 8));

    SeededRng rng(42);
    for (int i = 0; i < 50; ++i) {
        ModelShape s = single_matrix_shape(64 + rng.bounded(4096), 64 + rng.bounded(4096),
                                           1 + static_cast<std::uint32_t>(rng.bounded(40)),
                                           1 + rng.bounded(6));
        const auto rank = static_cast<std::uint32_t>(1 + rng.bounded(8));
        CHECK(lora_adapter_params(s, LoraConfig{rank, 16.0}) ==
              brute_force_adapter_params(s, rank));
        // Doubling the rank exactly doubles the count.
        CHECK(lora_adapter_params(s, LoraConfig{2 * rank, 16.0}) ==
              2 * lora_adapter_params(s, LoraConfig{rank, 16.0}));
    }
}

TEST_CASE("lora rank invariant rejects oversized ranks naming the matrix") {
    const ModelShape shape = single_matrix_shape(64, 256);
    CHECK_THROWS_WITH_AS(lora_adapter_params(shape, LoraConfig{64, 16.0}),
                         doctest::Contains("64x256"), Error);
    // The boundary itself (rank == min/4) is rejected too.
    CHECK_THROWS_AS(lora_adapter_params(shape, LoraConfig{16, 16.0}), Error);
    CHECK_NOTHROW(lora_adapter_params(shape, LoraConfig{15, 16.0}));
    CHECK_THROWS_AS(lora_adapter_params(shape, LoraConfig{0, 16.0}), Error);
}

TEST_CASE("default adapter storage brackets the tens-of-megabytes regime") {
    const double bytes = lora_adapter_storage_bytes(default_llama_shape(), LoraConfig{8, 16.0});
    CHECK(bytes == 33'554'432.0); // 32 layers x 4 matrices x 8 x (4096+4096) x 4 B
    CHECK(bytes >= 16e6);
    CHECK(bytes <= 80e6);
}

TEST_CASE("split ratio follows the caller's unit convention") {
    CHECK(split_ratio_D(4096, {32, DatumUnit::Bits}, 12.0) ==
          doctest::Approx(10922.67).epsilon(1e-6));
    CHECK(split_ratio_D(4096, {32, DatumUnit::Bits}, 12.0) == 4096.0 * 32.0 / 12.0);
    CHECK(split_ratio_D(4096, {4, DatumUnit::Bytes}, 12.0) == 4096.0 * 4.0 / 12.0);
    CHECK(split_ratio_D(1, {1, DatumUnit::Bits}, 1.0) == 1.0);
    CHECK_THROWS_AS(split_ratio_D(0, {32, DatumUnit::Bits}, 12.0), Error);

    // Invariant under simultaneous rescaling of datum and input size.
    SeededRng rng(7);
    for (int i = 0; i < 100; ++i) {
        const auto h = static_cast<std::uint32_t>(1 + rng.bounded(8192));
        const std::uint64_t v = 1 + rng.bounded(64);
        const double a = 1.0 + rng.uniform01() * 100.0;
        const std::uint64_t c = 2 + rng.bounded(7);
        const double lhs = split_ratio_D(h, {v * c, DatumUnit::Bits}, a * static_cast<double>(c));
        const double rhs = split_ratio_D(h, {v, DatumUnit::Bits}, a);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("transmission latency matches the serial formula") {
    const LinkSpec gbps{1e9, 0.0};
    CHECK(transmission_latency(10000, 12, gbps, true) == 10000.0 * 12.0 * 8.0 / 1e9);
    CHECK(transmission_latency(10000, 12, gbps, true) == doctest::Approx(0.96e-3).epsilon(1e-12));
    CHECK(transmission_latency(10000, 95, gbps, true) == doctest::Approx(7.6e-3).epsilon(1e-12));
    CHECK(transmission_latency(0, 12345, gbps, false) == 0.0);
    CHECK(transmission_latency(0, 12345, LinkSpec{1e9, 3.0}, true) == 0.0);

    const LinkSpec hs{1e9, 0.25};
    CHECK(transmission_latency(4, 100, hs, false) ==
          doctest::Approx(4 * 100 * 8.0 / 1e9 + 4 * 0.25));
    CHECK(transmission_latency(4, 100, hs, true) == doctest::Approx(4 * 100 * 8.0 / 1e9 + 0.25));
}

TEST_CASE("transmission latency is monotone in load and rate") {
    SeededRng rng(11);
    for (int i = 0; i < 200; ++i) {
        const std::uint64_t n = rng.bounded(10000);
        const std::uint64_t payload = rng.bounded(100000);
        const double rate = 1e6 + rng.uniform01() * 1e10;
        const double hs = rng.uniform01() * 0.01;
        const bool shared = rng.bounded(2) == 0;
        const LinkSpec link{rate, hs};
        const double base = transmission_latency(n, payload, link, shared);
        CHECK(transmission_latency(n + 1 + rng.bounded(100), payload, link, shared) >= base);
        CHECK(transmission_latency(n, payload + 1 + rng.bounded(1000), link, shared) >= base);
        CHECK(transmission_latency(n, payload, LinkSpec{rate * 2.0, hs}, shared) <= base);
    }
}

TEST_CASE("framework cost reproduces the per-request transfer calibration") {
    CostParams params = default_params();

    DeploymentSpec synergy;
    synergy.kind = FrameworkKind::Synergy;
    synergy.edge_model = default_gpt2_shape();
    synergy.cloud_model = default_llama_shape();
    synergy.concise_bytes = 12;
    synergy.comprehensive_bytes = 95;
    synergy.dedup_forward_fraction = 0.2;

    const CostReport sr = framework_cost(synergy, params);
    CHECK(sr.bytes_transferred_per_request == doctest::Approx(31.0).epsilon(1e-12));

    DeploymentSpec cloud_only;
    cloud_only.kind = FrameworkKind::CloudOnly;
    cloud_only.cloud_model = default_llama_shape();
    cloud_only.concise_bytes = 12;
    cloud_only.comprehensive_bytes = 95;
    const CostReport cr = framework_cost(cloud_only, params);
    CHECK(cr.bytes_transferred_per_request == 12.0);
    CHECK(cr.edge_storage_bytes == 0.0);
}

TEST_CASE("offload keeps everything at the edge") {
    CostParams params = default_params();
    DeploymentSpec offload;
    offload.kind = FrameworkKind::Offload;
    offload.cloud_model = default_llama_shape();
    offload.concise_bytes = 12;
    offload.comprehensive_bytes = 95;
    const CostReport r = framework_cost(offload, params);
    // Full cloud-model storage at the edge, nothing on the edge-cloud link.
    CHECK(r.edge_storage_bytes == 6.7e9 * 2.0);
    CHECK(r.bytes_transferred_per_request == 12.0);
    CHECK(r.transmission_latency_s ==
          transmission_latency(params.workload_n, 12, params.links.end_edge, false));
}

TEST_CASE("deployment spec invariants reject kind mismatches by field name") {
    CostParams params = default_params();
    DeploymentSpec bad;
    bad.kind = FrameworkKind::Synergy;
    bad.cloud_model = default_llama_shape();
    bad.concise_bytes = 12;
    bad.comprehensive_bytes = 95;
    bad.dedup_forward_fraction = 0.2;
    CHECK_THROWS_WITH_AS(framework_cost(bad, params), doctest::Contains("edge_model"), Error);

    DeploymentSpec split;
    split.kind = FrameworkKind::Splitting;
    split.cloud_model = default_llama_shape();
    split.concise_bytes = 12;
    split.split_fraction = 0.0;
    CHECK_THROWS_WITH_AS(framework_cost(split, params), doctest::Contains("split_fraction"), Error);

    DeploymentSpec cloudy;
    cloudy.kind = FrameworkKind::CloudOnly;
    cloudy.edge_model = default_gpt2_shape();
    cloudy.cloud_model = default_llama_shape();
    cloudy.concise_bytes = 12;
    CHECK_THROWS_WITH_AS(framework_cost(cloudy, params), doctest::Contains("edge_model"), Error);
}

TEST_CASE("cost reports stay finite and nonnegative over random specs") {
    SeededRng rng(3);
    CostParams params = default_params();
    for (int i = 0; i < 100; ++i) {
        DeploymentSpec spec;
        const int kind = static_cast<int>(rng.bounded(4));
        spec.kind = static_cast<FrameworkKind>(kind);
        spec.cloud_model = default_llama_shape();
        if (spec.kind == FrameworkKind::Synergy) spec.edge_model = default_gpt2_shape();
        spec.concise_bytes = 1 + rng.bounded(1000);
        spec.comprehensive_bytes = spec.concise_bytes + 1 + rng.bounded(1000);
        spec.split_fraction = 0.01 + rng.uniform01() * 0.98;
        spec.dedup_forward_fraction = rng.uniform01();
        params.workload_n = rng.bounded(100000);
        const CostReport r = framework_cost(spec, params);
        for (double v : {r.edge_storage_bytes, r.edge_finetune_vram_bytes,
                         r.edge_inference_vram_bytes, r.transmission_latency_s,
                         r.bytes_transferred_per_request}) {
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);
        }
    }
}

TEST_CASE("synergy needs less edge storage than offload for a smaller edge model") {
    CostParams params = default_params();
    SeededRng rng(5);
    for (int i = 0; i < 50; ++i) {
        ModelShape small = default_gpt2_shape();
        small.total_params = 1 + rng.bounded(1'000'000'000);
        ModelShape big = default_llama_shape();
        big.total_params = small.total_params + 1 + rng.bounded(9'000'000'000ull);
        small.bytes_per_param = big.bytes_per_param = 2;

        DeploymentSpec synergy;
        synergy.kind = FrameworkKind::Synergy;
        synergy.edge_model = small;
        synergy.cloud_model = big;
        synergy.concise_bytes = 12;
        synergy.comprehensive_bytes = 95;
        synergy.dedup_forward_fraction = 0.2;

        DeploymentSpec offload;
        offload.kind = FrameworkKind::Offload;
        offload.cloud_model = big;
        offload.concise_bytes = 12;
        offload.comprehensive_bytes = 95;

        CHECK(framework_cost(synergy, params).edge_storage_bytes <
              framework_cost(offload, params).edge_storage_bytes);
    }
}

TEST_CASE("vram factors reproduce the configured memory figures") {
    const CostParams params = default_params();
    const ModelShape llama = default_llama_shape();
    const ModelShape gpt2 = default_gpt2_shape();

    const double full_ft = 6.7e9 * 2.0 * params.factors.full_finetune_overhead;
    CHECK(full_ft == doctest::Approx(112e9).epsilon(1e-12));
    const double lora_ft = 6.7e9 * 2.0 * params.factors.lora_finetune_overhead;
    CHECK(lora_ft == doctest::Approx(28e9).epsilon(1e-12));
    const double edge_infer = static_cast<double>(gpt2.total_params) * gpt2.bytes_per_param *
                              params.factors.inference_overhead;
    CHECK(edge_infer == doctest::Approx(1.65e9).epsilon(1e-12));

    // Full fine-tune storage at 2 bytes/param lands within 10% of 12.55 GB.
    const double storage = static_cast<double>(llama.total_params) * llama.bytes_per_param;
    CHECK(std::abs(storage - 12.55e9) / 12.55e9 < 0.10);
}

TEST_CASE("config round-trips shapes and params") {
    const Config cfg = Config::from_file("configs/defaults.paper.conf");
    const ModelShape llama = model_shape_from_config(cfg, "llama-7b");
    CHECK(llama.total_params == 6'700'000'000ull);
    CHECK(llama.num_layers == 32);
    REQUIRE(llama.applies_lora_to.size() == 1);
    CHECK(llama.applies_lora_to[0].instances_per_layer == 4);

    const CostParams params = cost_params_from_config(cfg);
    CHECK(params.lora.rank == 8);
    CHECK(params.lora.scale_factor == 16.0);
    CHECK(params.split_datum.unit == DatumUnit::Bits);

    const DeploymentSpec spec = deployment_spec_from_config(cfg, FrameworkKind::Synergy);
    CHECK(spec.edge_model->name == "gpt2-base");
    const CostReport r = framework_cost(spec, params);
    CHECK(r.bytes_transferred_per_request == doctest::Approx(31.0).epsilon(1e-12));
    CHECK(r.edge_inference_vram_bytes == doctest::Approx(1.65e9).epsilon(1e-12));
}

#pragma once

#include "synergy/config.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace synergy::cost {

// One weight matrix family that receives a low-rank adapter.
struct LoraMatrixShape {
    std::uint64_t d_in = 0;
    std::uint64_t d_out = 0;
    std::uint64_t instances_per_layer = 0;
};

struct ModelShape {
    std::string name;
    std::uint64_t total_params = 0;
    std::uint32_t num_layers = 0;
    std::uint32_t hidden_dim = 0;
    std::uint32_t bytes_per_param = 0; // one of 1, 2, 4, 8
    std::vector<LoraMatrixShape> applies_lora_to;

    void validate() const;
};

struct LoraConfig {
    std::uint32_t rank = 0;
    double scale_factor = 0.0;
};

struct LinkSpec {
    double rate_bits_per_s = 0.0;
    double per_request_handshake_s = 0.0;

    void validate(const std::string& what) const;
};

enum class FrameworkKind { CloudOnly, Offload, Splitting, Synergy };

const char* framework_name(FrameworkKind kind);
FrameworkKind framework_from_name(const std::string& name);

struct DeploymentSpec {
    FrameworkKind kind = FrameworkKind::CloudOnly;
    std::optional<ModelShape> edge_model;
    std::optional<ModelShape> cloud_model;
    double split_fraction = 0.0;         // Splitting: fraction of layers at the edge
    double dedup_forward_fraction = 0.0; // Synergy: fraction of comprehensive bytes forwarded
    std::uint64_t concise_bytes = 0;
    std::uint64_t comprehensive_bytes = 0;

    void validate() const;
};

// VRAM estimates are total_params * bytes_per_param * factor. The shipped
// factors are calibration constants; see configs/defaults.paper.conf and the
// README for the derivations.
struct VramFactors {
    double inference_overhead = 1.0;
    double full_finetune_overhead = 1.0;
    double lora_finetune_overhead = 1.0;
};

struct Links {
    LinkSpec end_edge;
    LinkSpec edge_cloud;
};

enum class DatumUnit { Bits, Bytes };

struct DatumSize {
    std::uint64_t value = 0;
    DatumUnit unit = DatumUnit::Bits;
};

// Per-framework row of the comparison table.
struct CostReport {
    FrameworkKind kind = FrameworkKind::CloudOnly;
    double edge_storage_bytes = 0.0;
    double edge_finetune_vram_bytes = 0.0;
    double edge_inference_vram_bytes = 0.0;
    double transmission_latency_s = 0.0;
    double bytes_transferred_per_request = 0.0;
};

// Cross-framework inputs shared by framework_cost and the CLI.
struct CostParams {
    LoraConfig lora;
    VramFactors factors;
    Links links;
    std::uint64_t workload_n = 0;
    DatumSize split_datum;          // intermediate activation element size
    double avg_input_bytes = 0.0;   // denominator of the split ratio
};

// Total adapter parameter count: sum over adapted matrices of
// num_layers * instances_per_layer * rank * (d_in + d_out).
// Rejects configurations where rank >= min(d_in, d_out) / 4.
std::uint64_t lora_adapter_params(const ModelShape& shape, const LoraConfig& cfg);

inline double lora_adapter_storage_bytes(const ModelShape& shape, const LoraConfig& cfg) {
    return static_cast<double>(lora_adapter_params(shape, cfg)) * 4.0; // fp32 adapters
}

// Ratio of intermediate-layer data volume to input size. The datum value is
// used in its own unit, so the caller's unit choice is part of the contract:
// (4096, 32 bits, 12) and (4096, 4 bytes, 12) are different readings of the
// same activation row.
double split_ratio_D(std::uint32_t hidden_dim, DatumSize datum, double avg_input_bytes);

// Serial payload time plus handshake overhead. A shared connection pays one
// handshake; otherwise one per request. n == 0 always yields 0.
double transmission_latency(std::uint64_t n_requests, std::uint64_t payload_bytes,
                            const LinkSpec& link, bool shared_connection);

CostReport framework_cost(const DeploymentSpec& spec, const CostParams& params);

// Convenience wrappers over the config schema (see defaults.paper.conf).
ModelShape model_shape_from_config(const Config& cfg, const std::string& name);
CostParams cost_params_from_config(const Config& cfg);
DeploymentSpec deployment_spec_from_config(const Config& cfg, FrameworkKind kind);

// Splitting intermediate payload per request, in bytes (hidden_dim elements
// of split_datum each).
double split_payload_bytes(const ModelShape& cloud_model, DatumSize datum);

std::string render_report_table(const std::vector<CostReport>& rows, const CostParams& params,
                                const DeploymentSpec& reference_spec, double ratio_d);
std::string render_report_kv(const std::vector<CostReport>& rows, double ratio_d);

} // namespace synergy::cost

#include "synergy/cost_model.hpp"

#include "synergy/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace synergy::cost {

namespace {

[[noreturn]] void bad_spec(const std::string& what) {
    throw_error(ErrorCode::InvalidArgument, what);
}

std::string format2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string human_bytes(double bytes) {
    char buf[64];
    if (bytes >= 1e9) {
        std::snprintf(buf, sizeof(buf), "%.2f GB", bytes / 1e9);
    } else if (bytes >= 1e6) {
        std::snprintf(buf, sizeof(buf), "%.2f MB", bytes / 1e6);
    } else if (bytes >= 1e3) {
        std::snprintf(buf, sizeof(buf), "%.2f KB", bytes / 1e3);
    } else {
        std::snprintf(buf, sizeof(buf), "%.2f B", bytes);
    }
    return buf;
}

double storage_bytes(const ModelShape& m) {
    return static_cast<double>(m.total_params) * static_cast<double>(m.bytes_per_param);
}

double inference_vram(const ModelShape& m, const VramFactors& f) {
    return storage_bytes(m) * f.inference_overhead;
}

double full_finetune_vram(const ModelShape& m, const VramFactors& f) {
    return storage_bytes(m) * f.full_finetune_overhead;
}

} // namespace

void ModelShape::validate() const {
    if (total_params == 0) bad_spec("model '" + name + "': total_params must be > 0");
    if (num_layers == 0) bad_spec("model '" + name + "': num_layers must be > 0");
    if (hidden_dim == 0) bad_spec("model '" + name + "': hidden_dim must be > 0");
    if (bytes_per_param != 1 && bytes_per_param != 2 && bytes_per_param != 4 &&
        bytes_per_param != 8) {
        bad_spec("model '" + name + "': bytes_per_param must be one of 1,2,4,8");
    }
    for (const auto& m : applies_lora_to) {
        if (m.d_in == 0 || m.d_out == 0 || m.instances_per_layer == 0) {
            bad_spec("model '" + name + "': adapted matrix dimensions must be > 0");
        }
    }
}

void LinkSpec::validate(const std::string& what) const {
    if (rate_bits_per_s <= 0) bad_spec(what + ": rate_bits_per_s must be > 0");
    if (per_request_handshake_s < 0) bad_spec(what + ": per_request_handshake_s must be >= 0");
}

const char* framework_name(FrameworkKind kind) {
    switch (kind) {
        case FrameworkKind::CloudOnly: return "cloud-only";
        case FrameworkKind::Offload: return "offload";
        case FrameworkKind::Splitting: return "splitting";
        case FrameworkKind::Synergy: return "synergy";
    }
    return "unknown";
}

FrameworkKind framework_from_name(const std::string& name) {
    if (name == "cloud-only" || name == "cloudonly" || name == "cloud_only")
        return FrameworkKind::CloudOnly;
    if (name == "offload") return FrameworkKind::Offload;
    if (name == "splitting" || name == "split") return FrameworkKind::Splitting;
    if (name == "synergy") return FrameworkKind::Synergy;
    throw_error(ErrorCode::InvalidArgument, "unknown framework '" + name + "'");
}

void DeploymentSpec::validate() const {
    if (concise_bytes == 0) bad_spec("deployment: concise_bytes must be > 0");
    switch (kind) {
        case FrameworkKind::CloudOnly:
            if (edge_model) bad_spec("cloud-only: edge_model must be absent");
            if (!cloud_model) bad_spec("cloud-only: missing field cloud_model");
            break;
        case FrameworkKind::Offload:
            if (!cloud_model) bad_spec("offload: missing field cloud_model");
            break;
        case FrameworkKind::Splitting:
            if (!cloud_model) bad_spec("splitting: missing field cloud_model");
            if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
                bad_spec("splitting: split_fraction must lie in (0,1)");
            }
            break;
        case FrameworkKind::Synergy:
            if (!edge_model) bad_spec("synergy: missing field edge_model");
            if (!cloud_model) bad_spec("synergy: missing field cloud_model");
            if (dedup_forward_fraction < 0.0 || dedup_forward_fraction > 1.0) {
                bad_spec("synergy: dedup_forward_fraction must lie in [0,1]");
            }
            if (comprehensive_bytes == 0) bad_spec("synergy: comprehensive_bytes must be > 0");
            break;
    }
}

std::uint64_t lora_adapter_params(const ModelShape& shape, const LoraConfig& cfg) {
    shape.validate();
    if (cfg.rank < 1) bad_spec("lora: rank must be >= 1");
    if (shape.applies_lora_to.empty()) {
        bad_spec("model '" + shape.name + "': no matrices configured for adaptation");
    }
    std::uint64_t total = 0;
    for (const auto& m : shape.applies_lora_to) {
        const std::uint64_t min_dim = std::min(m.d_in, m.d_out);
        if (cfg.rank >= min_dim / 4) {
            std::ostringstream os;
            os << "lora: rank " << cfg.rank << " too large for matrix " << m.d_in << "x"
               << m.d_out << " (requires rank < " << (min_dim / 4) << ")";
            bad_spec(os.str());
        }
        total += static_cast<std::uint64_t>(shape.num_layers) * m.instances_per_layer *
                 cfg.rank * (m.d_in + m.d_out);
    }
    return total;
}

double split_ratio_D(std::uint32_t hidden_dim, DatumSize datum, double avg_input_bytes) {
    if (hidden_dim == 0 || datum.value == 0 || avg_input_bytes <= 0) {
        bad_spec("split_ratio_D: all inputs must be > 0");
    }
    return static_cast<double>(hidden_dim) * static_cast<double>(datum.value) / avg_input_bytes;
}

double transmission_latency(std::uint64_t n_requests, std::uint64_t payload_bytes,
                            const LinkSpec& link, bool shared_connection) {
    link.validate("transmission_latency");
    if (n_requests == 0) return 0.0;
    const double payload_s = static_cast<double>(n_requests) *
                             static_cast<double>(payload_bytes) * 8.0 / link.rate_bits_per_s;
    const double handshakes = shared_connection ? 1.0 : static_cast<double>(n_requests);
    return payload_s + link.per_request_handshake_s * handshakes;
}

double split_payload_bytes(const ModelShape& cloud_model, DatumSize datum) {
    const double datum_bytes = datum.unit == DatumUnit::Bits
                                   ? static_cast<double>(datum.value) / 8.0
                                   : static_cast<double>(datum.value);
    return static_cast<double>(cloud_model.hidden_dim) * datum_bytes;
}

CostReport framework_cost(const DeploymentSpec& spec, const CostParams& params) {
    spec.validate();
    params.links.end_edge.validate("end_edge link");
    params.links.edge_cloud.validate("edge_cloud link");

    CostReport r;
    r.kind = spec.kind;
    const std::uint64_t n = params.workload_n;

    switch (spec.kind) {
        case FrameworkKind::CloudOnly: {
            // One independent connection per request, end to cloud. The
            // end-to-cloud path is charged on the edge_cloud link.
            r.transmission_latency_s =
                transmission_latency(n, spec.concise_bytes, params.links.edge_cloud, false);
            r.bytes_transferred_per_request = static_cast<double>(spec.concise_bytes);
            break;
        }
        case FrameworkKind::Offload: {
            const ModelShape& hosted = *spec.cloud_model;
            r.edge_storage_bytes = storage_bytes(hosted);
            r.edge_finetune_vram_bytes = full_finetune_vram(hosted, params.factors);
            r.edge_inference_vram_bytes = inference_vram(hosted, params.factors);
            r.transmission_latency_s =
                transmission_latency(n, spec.concise_bytes, params.links.end_edge, false);
            r.bytes_transferred_per_request = static_cast<double>(spec.concise_bytes);
            break;
        }
        case FrameworkKind::Splitting: {
            const ModelShape& cloud = *spec.cloud_model;
            const double payload = split_payload_bytes(cloud, params.split_datum);
            r.edge_storage_bytes = storage_bytes(cloud) * spec.split_fraction;
            r.edge_finetune_vram_bytes = full_finetune_vram(cloud, params.factors) * spec.split_fraction;
            r.edge_inference_vram_bytes = inference_vram(cloud, params.factors) * spec.split_fraction;
            r.transmission_latency_s =
                transmission_latency(n, spec.concise_bytes, params.links.end_edge, false) +
                transmission_latency(n, static_cast<std::uint64_t>(payload),
                                     params.links.edge_cloud, true);
            r.bytes_transferred_per_request = static_cast<double>(spec.concise_bytes) + payload;
            break;
        }
        case FrameworkKind::Synergy: {
            const ModelShape& edge = *spec.edge_model;
            r.edge_storage_bytes = storage_bytes(edge);
            r.edge_finetune_vram_bytes = full_finetune_vram(edge, params.factors);
            r.edge_inference_vram_bytes = inference_vram(edge, params.factors);
            // Concise prompts end->edge; de-duplicated comprehensive prompts
            // edge->cloud over one persistent connection.
            const double forwarded =
                static_cast<double>(n) * spec.dedup_forward_fraction;
            const double edge_cloud_payload_s =
                forwarded * static_cast<double>(spec.comprehensive_bytes) * 8.0 /
                params.links.edge_cloud.rate_bits_per_s;
            const double edge_cloud_handshake_s =
                n > 0 ? params.links.edge_cloud.per_request_handshake_s : 0.0;
            r.transmission_latency_s =
                transmission_latency(n, spec.concise_bytes, params.links.end_edge, false) +
                edge_cloud_payload_s + edge_cloud_handshake_s;
            r.bytes_transferred_per_request =
                static_cast<double>(spec.concise_bytes) +
                static_cast<double>(spec.comprehensive_bytes) * spec.dedup_forward_fraction;
            break;
        }
    }
    return r;
}

ModelShape model_shape_from_config(const Config& cfg, const std::string& name) {
    const std::string p = "model." + name + ".";
    ModelShape shape;
    shape.name = name;
    shape.total_params = cfg.get_uint(p + "total_params");
    shape.num_layers = static_cast<std::uint32_t>(cfg.get_uint(p + "num_layers"));
    shape.hidden_dim = static_cast<std::uint32_t>(cfg.get_uint(p + "hidden_dim"));
    shape.bytes_per_param = static_cast<std::uint32_t>(cfg.get_uint(p + "bytes_per_param"));
    // lora.N = <d_in>x<d_out>x<instances_per_layer>
    for (const auto& key : cfg.keys_with_prefix(p + "lora.")) {
        const std::string v = cfg.get_string(key);
        unsigned long long d_in = 0, d_out = 0, inst = 0;
        if (std::sscanf(v.c_str(), "%llux%llux%llu", &d_in, &d_out, &inst) != 3) {
            throw_error(ErrorCode::Config,
                        "config key '" + key + "': expected <d_in>x<d_out>x<instances>, got '" + v + "'");
        }
        shape.applies_lora_to.push_back(LoraMatrixShape{d_in, d_out, inst});
    }
    shape.validate();
    return shape;
}

CostParams cost_params_from_config(const Config& cfg) {
    CostParams p;
    p.lora.rank = static_cast<std::uint32_t>(cfg.get_uint("lora.rank"));
    p.lora.scale_factor = cfg.get_double("lora.scale_factor");
    p.factors.inference_overhead = cfg.get_double("cost.factors.inference_overhead");
    p.factors.full_finetune_overhead = cfg.get_double("cost.factors.full_finetune_overhead");
    p.factors.lora_finetune_overhead = cfg.get_double("cost.factors.lora_finetune_overhead");
    p.links.end_edge.rate_bits_per_s = cfg.get_double("link.end_edge.rate_bits_per_s");
    p.links.edge_cloud.rate_bits_per_s = cfg.get_double("link.edge_cloud.rate_bits_per_s");
    // The comparison table reports payload transmission time; connection
    // establishment is the simulator's concern unless overridden here.
    p.links.end_edge.per_request_handshake_s =
        cfg.get_double_or("cost.end_edge_handshake_s", 0.0);
    p.links.edge_cloud.per_request_handshake_s =
        cfg.get_double_or("cost.edge_cloud_handshake_s", 0.0);
    p.workload_n = cfg.get_uint("cost.workload_n");
    p.split_datum.value = cfg.get_uint("cost.split_datum_value");
    const std::string unit = cfg.get_string("cost.split_datum_unit");
    if (unit == "bits") {
        p.split_datum.unit = DatumUnit::Bits;
    } else if (unit == "bytes") {
        p.split_datum.unit = DatumUnit::Bytes;
    } else {
        throw_error(ErrorCode::Config,
                    "config key 'cost.split_datum_unit': expected bits or bytes, got '" + unit + "'");
    }
    p.avg_input_bytes = cfg.get_double("cost.avg_input_bytes");
    return p;
}

DeploymentSpec deployment_spec_from_config(const Config& cfg, FrameworkKind kind) {
    DeploymentSpec spec;
    spec.kind = kind;
    spec.concise_bytes = cfg.get_uint("cost.concise_bytes");
    spec.comprehensive_bytes = cfg.get_uint("cost.comprehensive_bytes");
    spec.split_fraction = cfg.get_double_or("cost.split_fraction", 0.25);
    spec.dedup_forward_fraction = cfg.get_double_or("cost.dedup_forward_fraction", 0.2);
    const std::string edge_name = cfg.get_string("cost.edge_model");
    const std::string cloud_name = cfg.get_string("cost.cloud_model");
    if (kind != FrameworkKind::CloudOnly) {
        spec.edge_model = model_shape_from_config(cfg, edge_name);
    }
    spec.cloud_model = model_shape_from_config(cfg, cloud_name);
    if (kind == FrameworkKind::Offload || kind == FrameworkKind::Splitting) {
        spec.edge_model.reset(); // edge hosts (part of) the cloud model instead
    }
    spec.validate();
    return spec;
}

std::string render_report_table(const std::vector<CostReport>& rows, const CostParams& params,
                                const DeploymentSpec& reference_spec, double ratio_d) {
    std::ostringstream os;
    os << "framework    edge_storage  finetune_vram  infer_vram  tx_latency_ms  bytes/request\n";
    for (const auto& r : rows) {
        char line[256];
        std::snprintf(line, sizeof(line), "%-12s %-13s %-14s %-11s %-14s %s\n",
                      framework_name(r.kind), human_bytes(r.edge_storage_bytes).c_str(),
                      human_bytes(r.edge_finetune_vram_bytes).c_str(),
                      human_bytes(r.edge_inference_vram_bytes).c_str(),
                      format2(r.transmission_latency_s * 1000.0).c_str(),
                      format2(r.bytes_transferred_per_request).c_str());
        os << line;
    }
    os << "\n";
    os << "workload: " << params.workload_n << " requests, concise "
       << reference_spec.concise_bytes << " B, comprehensive "
       << reference_spec.comprehensive_bytes << " B\n";
    // The headline ratio is conventionally quoted truncated, not rounded.
    os << "splitting data ratio D \xE2\x89\x88 " << static_cast<std::uint64_t>(ratio_d)
       << " (exact " << format2(ratio_d) << ")\n";
    return os.str();
}

std::string render_report_kv(const std::vector<CostReport>& rows, double ratio_d) {
    std::ostringstream os;
    char num[64];
    const auto full = [&num](double v) {
        std::snprintf(num, sizeof(num), "%.12g", v);
        return std::string(num);
    };
    os << "split_ratio_d=" << format2(ratio_d) << "\n";
    for (const auto& r : rows) {
        const std::string p = framework_name(r.kind);
        os << p << ".edge_storage_bytes=" << full(r.edge_storage_bytes) << "\n"
           << p << ".edge_finetune_vram_bytes=" << full(r.edge_finetune_vram_bytes) << "\n"
           << p << ".edge_inference_vram_bytes=" << full(r.edge_inference_vram_bytes) << "\n"
           << p << ".transmission_latency_s=" << full(r.transmission_latency_s) << "\n"
           << p << ".bytes_transferred_per_request=" << format2(r.bytes_transferred_per_request)
           << "\n";
    }
    return os.str();
}

} // namespace synergy::cost

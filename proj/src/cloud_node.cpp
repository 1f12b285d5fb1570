#include "synergy/cloud_node.hpp"

#include "synergy/error.hpp"

#include <cmath>
#include <sstream>

namespace synergy::cloud {

void AdapterRegistry::register_adapter(const AdapterRecord& rec) {
    if (rec.rank == 0) {
        throw_error(ErrorCode::InvalidArgument, "adapter '" + rec.adapter_id + "': rank must be >= 1");
    }
    if (adapters_.contains(rec.adapter_id)) {
        throw_error(ErrorCode::InvalidArgument,
                    "adapter '" + rec.adapter_id + "' is already registered");
    }
    const auto model = known_models_.find(rec.base_model);
    if (model == known_models_.end()) {
        throw_error(ErrorCode::InvalidArgument,
                    "adapter '" + rec.adapter_id + "': unknown base model '" + rec.base_model + "'");
    }
    cost::LoraConfig lora{rec.rank, rec.scale_factor};
    const double expected = cost::lora_adapter_storage_bytes(model->second, lora);
    const double actual = static_cast<double>(rec.size_bytes);
    if (std::abs(actual - expected) > 0.01 * expected) {
        std::ostringstream os;
        os << "adapter '" << rec.adapter_id << "': size " << rec.size_bytes
           << " inconsistent with expected " << static_cast<std::uint64_t>(expected)
           << " bytes (rank " << rec.rank << ")";
        throw_error(ErrorCode::InvalidArgument, os.str());
    }
    adapters_[rec.adapter_id] = rec;
}

const AdapterRecord* AdapterRegistry::find(const std::string& adapter_id) const {
    const auto it = adapters_.find(adapter_id);
    return it == adapters_.end() ? nullptr : &it->second;
}

std::vector<std::string> AdapterRegistry::list() const {
    std::vector<std::string> out;
    out.reserve(adapters_.size());
    for (const auto& [id, _] : adapters_) out.push_back(id);
    return out;
}

AdapterRegistry AdapterRegistry::from_config(const Config& cfg) {
    std::map<std::string, cost::ModelShape> models;
    // model.<name>.total_params marks a model section.
    for (const auto& key : cfg.keys_with_prefix("model.")) {
        const std::string rest = key.substr(6);
        const std::size_t dot = rest.find('.');
        if (dot == std::string::npos) continue;
        const std::string name = rest.substr(0, dot);
        if (!models.contains(name) && cfg.has("model." + name + ".total_params")) {
            models.emplace(name, cost::model_shape_from_config(cfg, name));
        }
    }
    AdapterRegistry registry(std::move(models));
    // adapter.<id>.* sections, registered in sorted id order.
    std::string current;
    for (const auto& key : cfg.keys_with_prefix("adapter.")) {
        const std::string rest = key.substr(8);
        const std::size_t dot = rest.find('.');
        if (dot == std::string::npos) continue;
        const std::string id = rest.substr(0, dot);
        if (id == current) continue;
        current = id;
        AdapterRecord rec;
        rec.adapter_id = id;
        rec.base_model = cfg.get_string("adapter." + id + ".base_model");
        rec.rank = static_cast<std::uint32_t>(cfg.get_uint("adapter." + id + ".rank"));
        rec.scale_factor = cfg.get_double_or("adapter." + id + ".scale_factor", 16.0);
        rec.size_bytes = cfg.get_uint("adapter." + id + ".size_bytes");
        registry.register_adapter(rec);
    }
    return registry;
}

std::vector<proto::PromptEnvelope> respond_batch(
    const std::vector<proto::PromptEnvelope>& batch, backend::TextBackend& responder) {
    if (batch.empty()) {
        throw_error(ErrorCode::InvalidArgument, "respond_batch: batch must be nonempty");
    }
    std::vector<backend::GenerationRequest> reqs;
    reqs.reserve(batch.size());
    for (const auto& env : batch) {
        if (env.stage != proto::Stage::Comprehensive) {
            throw_error(ErrorCode::InvalidArgument,
                        "respond_batch: request '" + env.request_id + "' is not comprehensive-stage");
        }
        backend::GenerationRequest req;
        req.prompt = env.text;
        reqs.push_back(std::move(req));
    }

    std::vector<proto::PromptEnvelope> out;
    out.reserve(batch.size());
    try {
        const std::vector<backend::GenerationResult> results = responder.generate_batch(reqs);
        if (results.size() != batch.size()) {
            throw_error(ErrorCode::Internal, "backend returned a short batch");
        }
        for (std::size_t i = 0; i < batch.size(); ++i) {
            out.push_back(proto::make_envelope(batch[i].request_id, proto::Stage::Response,
                                               results[i].text, batch[i].origin_bs_id,
                                               batch[i].created_unix_ms));
        }
    } catch (const Error& e) {
        // Per-envelope error responses; a request is never dropped.
        for (const auto& env : batch) {
            out.push_back(proto::make_envelope(env.request_id, proto::Stage::Response,
                                               std::string("error: backend failed: ") + e.what(),
                                               env.origin_bs_id, env.created_unix_ms));
        }
    }
    return out;
}

std::string CloudMetrics::render() const {
    std::ostringstream os;
    os << "batches " << batches << '\n'
       << "responses " << responses << '\n'
       << "backend_failures " << backend_failures << '\n'
       << "adapters " << adapters << '\n';
    return os.str();
}

} // namespace synergy::cloud

#pragma once

#include "synergy/config.hpp"
#include "synergy/cost_model.hpp"
#include "synergy/model_backend.hpp"
#include "synergy/protocol.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace synergy::cloud {

// Serving-side bookkeeping for low-rank adapters.
struct AdapterRecord {
    std::string adapter_id;
    std::string base_model;
    std::uint32_t rank = 0;
    double scale_factor = 0.0;
    std::uint64_t size_bytes = 0;
};

class AdapterRegistry {
public:
    // Shapes the registry can validate sizes against, keyed by model name.
    explicit AdapterRegistry(std::map<std::string, cost::ModelShape> known_models)
        : known_models_(std::move(known_models)) {}

    // Rejects duplicates, rank 0, unknown base models, and any size_bytes
    // more than 1% away from the adapter arithmetic (params * 4 bytes).
    void register_adapter(const AdapterRecord& rec);

    const AdapterRecord* find(const std::string& adapter_id) const;
    std::vector<std::string> list() const;

    static AdapterRegistry from_config(const Config& cfg);

private:
    std::map<std::string, cost::ModelShape> known_models_;
    std::map<std::string, AdapterRecord> adapters_;
};

// One response per input, same request ids, order preserved. The backend is
// invoked exactly once per batch; a backend failure yields per-envelope
// error responses instead of dropped requests.
std::vector<proto::PromptEnvelope> respond_batch(
    const std::vector<proto::PromptEnvelope>& batch, backend::TextBackend& responder);

struct CloudMetrics {
    std::uint64_t batches = 0;
    std::uint64_t responses = 0;
    std::uint64_t backend_failures = 0;
    std::uint64_t adapters = 0;

    std::string render() const;
};

struct CloudServiceConfig {
    std::string listen_host = "127.0.0.1";
    std::uint16_t listen_port = 0;
    std::string adapter_registry_path; // optional config file of adapters
    proto::WorkflowGraph workflow;
};

CloudServiceConfig cloud_service_config_from(const Config& cfg);

class CloudService {
public:
    CloudService(CloudServiceConfig cfg, std::unique_ptr<backend::TextBackend> responder);
    ~CloudService();

    std::uint16_t port() const;
    CloudMetrics metrics() const;
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace synergy::cloud

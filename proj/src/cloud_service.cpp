#include "synergy/cloud_node.hpp"
#include "synergy/error.hpp"
#include "synergy/net.hpp"

#include <mutex>

namespace synergy::cloud {

CloudServiceConfig cloud_service_config_from(const Config& cfg) {
    CloudServiceConfig out;
    const auto [host, port] = net::parse_address(cfg.get_string_or("cloud.listen", "127.0.0.1:7402"));
    out.listen_host = host;
    out.listen_port = port;
    out.adapter_registry_path = cfg.get_string_or("cloud.adapter_registry", "");
    out.workflow = proto::workflow_from_config(cfg);
    return out;
}

struct CloudService::Impl {
    CloudServiceConfig cfg;
    std::unique_ptr<backend::TextBackend> responder;
    std::unique_ptr<net::TcpServer> server;
    std::unique_ptr<AdapterRegistry> adapters;
    mutable std::mutex metrics_mutex;
    CloudMetrics metrics;

    void handle_connection(net::Socket& sock) {
        proto::FrameReader reader;
        char buf[16384];
        for (;;) {
            std::size_t n = 0;
            try {
                n = sock.recv_some(buf, sizeof(buf));
            } catch (const Error&) {
                return;
            }
            if (n == 0) return;
            // Frames completed by one read burst form one batch; the edge
            // forwarder writes whole batches back to back.
            std::vector<proto::PromptEnvelope> batch = reader.feed(buf, n);
            if (batch.empty()) continue;
            handle_batch(sock, batch);
        }
    }

    void handle_batch(net::Socket& sock, const std::vector<proto::PromptEnvelope>& batch) {
        std::vector<proto::PromptEnvelope> valid;
        std::vector<proto::PromptEnvelope> responses(batch.size());
        std::vector<std::size_t> valid_slots;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (batch[i].stage == proto::Stage::Comprehensive) {
                valid.push_back(batch[i]);
                valid_slots.push_back(i);
            } else {
                responses[i] = proto::make_envelope(
                    batch[i].request_id, proto::Stage::Response,
                    "error: expected a comprehensive-stage prompt", batch[i].origin_bs_id,
                    batch[i].created_unix_ms);
            }
        }
        if (!valid.empty()) {
            const std::vector<proto::PromptEnvelope> answered = respond_batch(valid, *responder);
            bool failed = false;
            for (std::size_t i = 0; i < answered.size(); ++i) {
                failed = failed || answered[i].text.rfind("error:", 0) == 0;
                responses[valid_slots[i]] = answered[i];
            }
            std::lock_guard<std::mutex> lock(metrics_mutex);
            ++metrics.batches;
            metrics.responses += answered.size();
            if (failed) ++metrics.backend_failures;
        }
        std::string wire;
        for (const auto& r : responses) wire += proto::encode(r);
        sock.send_all(wire);
    }
};

CloudService::CloudService(CloudServiceConfig cfg, std::unique_ptr<backend::TextBackend> responder)
    : impl_(std::make_unique<Impl>()) {
    const auto violations = proto::validate_workflow(cfg.workflow);
    if (!violations.empty()) {
        throw_error(ErrorCode::Config, "invalid workflow: " + violations.front());
    }
    impl_->cfg = std::move(cfg);
    impl_->responder = std::move(responder);
    if (!impl_->cfg.adapter_registry_path.empty()) {
        impl_->adapters = std::make_unique<AdapterRegistry>(
            AdapterRegistry::from_config(Config::from_file(impl_->cfg.adapter_registry_path)));
        impl_->metrics.adapters = impl_->adapters->list().size();
    }
    impl_->server = std::make_unique<net::TcpServer>(
        impl_->cfg.listen_host, impl_->cfg.listen_port,
        [impl = impl_.get()](net::Socket& sock) { impl->handle_connection(sock); });
}

CloudService::~CloudService() { stop(); }

std::uint16_t CloudService::port() const { return impl_->server->port(); }

CloudMetrics CloudService::metrics() const {
    std::lock_guard<std::mutex> lock(impl_->metrics_mutex);
    return impl_->metrics;
}

void CloudService::stop() {
    if (impl_->server) impl_->server->stop();
}

} // namespace synergy::cloud

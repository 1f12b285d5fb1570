#include "synergy/edge_node.hpp"
#include "synergy/error.hpp"
#include "synergy/net.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <iostream>
#include <mutex>
#include <thread>

namespace synergy::edge {

namespace {

double steady_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct ConnState {
    net::Socket* sock = nullptr;
    std::mutex write_mutex;
    bool open = true;

    void write(const proto::PromptEnvelope& env) {
        std::lock_guard<std::mutex> lock(write_mutex);
        if (!open || sock == nullptr) return;
        try {
            sock->send_all(proto::encode(env));
        } catch (const Error&) {
            open = false; // client went away; nothing left to deliver
        }
    }

    void detach() {
        std::lock_guard<std::mutex> lock(write_mutex);
        open = false;
        sock = nullptr;
    }
};

struct PendingRequest {
    std::shared_ptr<ConnState> conn;
    std::string client_request_id;
    std::uint64_t dedup_key = 0;
    std::string origin_bs_id;
    std::int64_t created_unix_ms = 0;
};

} // namespace

EdgeServiceConfig edge_service_config_from(const Config& cfg) {
    EdgeServiceConfig out;
    const auto [host, port] = net::parse_address(cfg.get_string_or("edge.listen", "127.0.0.1:7401"));
    out.listen_host = host;
    out.listen_port = port;
    const auto [mhost, mport] =
        net::parse_address(cfg.get_string_or("edge.metrics_listen", "127.0.0.1:7411"));
    out.metrics_host = mhost;
    out.metrics_port = mport;
    const auto [chost, cport] = net::parse_address(cfg.get_string_or("edge.cloud", "127.0.0.1:7402"));
    out.cloud_host = chost;
    out.cloud_port = cport;
    out.batch_window_s = cfg.get_double_or("edge.batch_window_s", 0.05);
    out.max_batch = cfg.get_uint_or("edge.max_batch", 20);
    out.dedup_ttl_s = cfg.get_double_or("edge.dedup_ttl_s", 300.0);
    out.dedup_capacity = cfg.get_uint_or("edge.dedup_capacity", 65536);
    out.terminate_threshold = cfg.get_double_or("edge.terminate_threshold", 0.9);
    out.workflow = proto::workflow_from_config(cfg);
    return out;
}

struct EdgeService::Impl {
    EdgeServiceConfig cfg;
    ProfileStore profiles;
    std::unique_ptr<backend::TextBackend> completer;
    LocationProfile fallback_profile; // empty facts

    std::mutex state_mutex;
    DedupCache cache;
    std::map<std::string, PendingRequest> pending;
    EdgeMetrics metrics;
    std::atomic<std::uint64_t> next_conn_id{0};

    // Forwarding pipeline.
    std::mutex queue_mutex;
    std::condition_variable queue_cv;
    std::deque<proto::PromptEnvelope> queue;
    bool stopping = false;
    std::thread forwarder;

    std::mutex cloud_mutex;
    net::Socket cloud_sock;
    std::thread cloud_reader;

    std::unique_ptr<net::TcpServer> server;
    std::unique_ptr<net::TcpServer> metrics_server;

    explicit Impl(EdgeServiceConfig c)
        : cfg(std::move(c)),
          cache(cfg.dedup_ttl_s, cfg.dedup_capacity, steady_seconds) {
        fallback_profile.bs_id = "";
        fallback_profile.region_name = "unknown";
    }

    void handle_connection(net::Socket& sock) {
        auto conn = std::make_shared<ConnState>();
        conn->sock = &sock;
        const std::uint64_t conn_id = next_conn_id.fetch_add(1);
        proto::FrameReader reader;
        char buf[16384];
        for (;;) {
            std::size_t n = 0;
            try {
                n = sock.recv_some(buf, sizeof(buf));
            } catch (const Error&) {
                break;
            }
            if (n == 0) break;
            std::vector<proto::PromptEnvelope> envs;
            try {
                envs = reader.feed(buf, n);
            } catch (const Error& e) {
                std::cerr << "edge: dropping connection: " << e.what() << "\n";
                break;
            }
            for (auto& env : envs) handle_envelope(conn, conn_id, env);
        }
        conn->detach();
    }

    void handle_envelope(const std::shared_ptr<ConnState>& conn, std::uint64_t conn_id,
                         const proto::PromptEnvelope& env) {
        {
            std::lock_guard<std::mutex> lock(state_mutex);
            ++metrics.requests;
        }
        if (env.stage != proto::Stage::Concise) {
            conn->write(proto::make_envelope(env.request_id, proto::Stage::Response,
                                             "error: expected a concise-stage prompt",
                                             env.origin_bs_id, env.created_unix_ms));
            return;
        }
        const std::string internal_id =
            "c" + std::to_string(conn_id) + "/" + env.request_id;

        const LocationProfile* profile = profiles.find(env.origin_bs_id);
        if (profile == nullptr) {
            std::lock_guard<std::mutex> lock(state_mutex);
            ++metrics.unknown_bs;
            if (metrics.unknown_bs == 1) {
                std::cerr << "edge: unknown bs_id '" << env.origin_bs_id
                          << "', serving without personalization\n";
            }
            profile = &fallback_profile;
        }

        proto::PromptEnvelope internal_env = env;
        internal_env.request_id = internal_id;

        DedupDecision decision{Fresh{}};
        {
            std::lock_guard<std::mutex> lock(state_mutex);
            decision = cache.lookup(internal_env);
        }

        if (const auto* cached = std::get_if<CachedResponse>(&decision)) {
            {
                std::lock_guard<std::mutex> lock(state_mutex);
                ++metrics.dedup_hits;
            }
            conn->write(proto::make_envelope(env.request_id, proto::Stage::Response, cached->text,
                                             env.origin_bs_id, env.created_unix_ms));
            return;
        }
        if (std::get_if<DuplicateOf>(&decision) != nullptr) {
            std::lock_guard<std::mutex> lock(state_mutex);
            ++metrics.dedup_hits;
            pending[internal_id] = PendingRequest{conn, env.request_id, internal_env.dedup_key,
                                                  env.origin_bs_id, env.created_unix_ms};
            return; // answered when the first occurrence completes
        }

        // Fresh request: enhance, then either terminate locally or forward.
        EnhanceResult enhanced = enhance(internal_env, *profile, *completer);
        if (enhanced.degraded) {
            std::lock_guard<std::mutex> lock(state_mutex);
            ++metrics.degraded_enhancements;
        }
        const LocalDecision local = maybe_terminate(enhanced.envelope, enhanced.confidence,
                                                    *completer, cfg.terminate_threshold);
        if (local.respond_locally) {
            std::vector<std::string> waiter_ids;
            {
                std::lock_guard<std::mutex> lock(state_mutex);
                ++metrics.local_terminations;
                cache.store_response(internal_env.dedup_key, local.response.text);
                waiter_ids = cache.take_waiters(internal_env.dedup_key);
            }
            proto::PromptEnvelope response =
                proto::make_envelope(env.request_id, proto::Stage::Response, local.response.text,
                                     env.origin_bs_id, env.created_unix_ms);
            response.terminated_at_edge = true;
            conn->write(response);
            answer_waiters(waiter_ids, local.response.text, true);
            return;
        }

        {
            std::lock_guard<std::mutex> lock(state_mutex);
            pending[internal_id] = PendingRequest{conn, env.request_id, internal_env.dedup_key,
                                                  env.origin_bs_id, env.created_unix_ms};
        }
        {
            std::lock_guard<std::mutex> lock(queue_mutex);
            queue.push_back(enhanced.envelope);
        }
        queue_cv.notify_one();
    }

    void answer_waiters(const std::vector<std::string>& waiter_ids, const std::string& text,
                        bool terminated_at_edge) {
        for (const auto& wid : waiter_ids) {
            PendingRequest info;
            {
                std::lock_guard<std::mutex> lock(state_mutex);
                const auto it = pending.find(wid);
                if (it == pending.end()) continue;
                info = it->second;
                pending.erase(it);
            }
            proto::PromptEnvelope response =
                proto::make_envelope(info.client_request_id, proto::Stage::Response, text,
                                     info.origin_bs_id, info.created_unix_ms);
            response.terminated_at_edge = terminated_at_edge;
            info.conn->write(response);
        }
    }

    void forwarder_loop() {
        for (;;) {
            std::vector<proto::PromptEnvelope> batch;
            {
                std::unique_lock<std::mutex> lock(queue_mutex);
                queue_cv.wait(lock, [this] { return stopping || !queue.empty(); });
                if (queue.empty()) {
                    if (stopping) return;
                    continue;
                }
                // Batch closes when the window elapses from its first
                // element or max_batch is reached. system_clock deadline:
                // the steady-clock wait path (pthread_cond_clockwait) is
                // invisible to this toolchain's ThreadSanitizer.
                const auto deadline = std::chrono::system_clock::now() +
                                      std::chrono::duration_cast<std::chrono::nanoseconds>(
                                          std::chrono::duration<double>(cfg.batch_window_s));
                while (!stopping && queue.size() < cfg.max_batch) {
                    if (queue_cv.wait_until(lock, deadline) == std::cv_status::timeout) break;
                }
                const std::size_t take = std::min(queue.size(), cfg.max_batch);
                batch.assign(queue.begin(), queue.begin() + static_cast<std::ptrdiff_t>(take));
                queue.erase(queue.begin(), queue.begin() + static_cast<std::ptrdiff_t>(take));
            }
            if (!batch.empty()) send_batch(batch);
            {
                std::lock_guard<std::mutex> lock(queue_mutex);
                if (stopping && queue.empty()) return;
            }
        }
    }

    void send_batch(const std::vector<proto::PromptEnvelope>& batch) {
        std::string wire;
        for (const auto& env : batch) wire += proto::encode(env);
        try {
            std::lock_guard<std::mutex> lock(cloud_mutex);
            if (!cloud_sock.valid()) {
                cloud_sock = net::connect_to(cfg.cloud_host, cfg.cloud_port, 5.0);
                cloud_reader = std::thread([this] { cloud_reader_loop(); });
            }
            cloud_sock.send_all(wire);
        } catch (const Error& e) {
            std::cerr << "edge: cloud unreachable: " << e.what() << "\n";
            for (const auto& env : batch) {
                deliver(env.request_id, std::string("error: cloud unreachable: ") + e.what(),
                        /*is_error=*/true);
            }
            return;
        }
        std::lock_guard<std::mutex> lock(state_mutex);
        ++metrics.forwarded_batches;
        metrics.forwarded_requests += batch.size();
    }

    void cloud_reader_loop() {
        proto::FrameReader reader;
        char buf[16384];
        for (;;) {
            std::size_t n = 0;
            try {
                n = cloud_sock.recv_some(buf, sizeof(buf));
            } catch (const Error&) {
                return;
            }
            if (n == 0) return;
            std::vector<proto::PromptEnvelope> envs;
            try {
                envs = reader.feed(buf, n);
            } catch (const Error& e) {
                std::cerr << "edge: bad frame from cloud: " << e.what() << "\n";
                return;
            }
            for (const auto& env : envs) {
                deliver(env.request_id, env.text, env.text.rfind("error:", 0) == 0);
            }
        }
    }

    // Completes a forwarded request: answers the original and every waiter
    // queued behind it. Errors are not cached, so later retries run fresh.
    void deliver(const std::string& internal_id, const std::string& text, bool is_error) {
        PendingRequest info;
        std::vector<std::string> waiter_ids;
        {
            std::lock_guard<std::mutex> lock(state_mutex);
            const auto it = pending.find(internal_id);
            if (it == pending.end()) return;
            info = it->second;
            pending.erase(it);
            waiter_ids = cache.take_waiters(info.dedup_key);
            if (is_error) {
                cache.drop(info.dedup_key);
            } else {
                cache.store_response(info.dedup_key, text);
            }
        }
        info.conn->write(proto::make_envelope(info.client_request_id, proto::Stage::Response, text,
                                              info.origin_bs_id, info.created_unix_ms));
        answer_waiters(waiter_ids, text, false);
    }

    std::string render_metrics() {
        std::lock_guard<std::mutex> lock(state_mutex);
        return metrics.render();
    }

    void stop_all() {
        if (server) server->stop();
        {
            std::lock_guard<std::mutex> lock(queue_mutex);
            stopping = true;
        }
        queue_cv.notify_all();
        if (forwarder.joinable()) forwarder.join();
        {
            std::lock_guard<std::mutex> lock(cloud_mutex);
            if (cloud_sock.valid()) cloud_sock.shutdown_both();
        }
        if (cloud_reader.joinable()) cloud_reader.join();
        {
            std::lock_guard<std::mutex> lock(cloud_mutex);
            cloud_sock.close();
        }
        if (metrics_server) metrics_server->stop();
    }
};

EdgeService::EdgeService(EdgeServiceConfig cfg, ProfileStore profiles,
                         std::unique_ptr<backend::TextBackend> completer)
    : impl_(std::make_unique<Impl>(std::move(cfg))) {
    const auto violations = proto::validate_workflow(impl_->cfg.workflow);
    if (!violations.empty()) {
        throw_error(ErrorCode::Config, "invalid workflow: " + violations.front());
    }
    impl_->profiles = std::move(profiles);
    impl_->completer = std::move(completer);
    impl_->forwarder = std::thread([impl = impl_.get()] { impl->forwarder_loop(); });
    impl_->server = std::make_unique<net::TcpServer>(
        impl_->cfg.listen_host, impl_->cfg.listen_port,
        [impl = impl_.get()](net::Socket& sock) { impl->handle_connection(sock); });
    impl_->metrics_server = std::make_unique<net::TcpServer>(
        impl_->cfg.metrics_host, impl_->cfg.metrics_port,
        [impl = impl_.get()](net::Socket& sock) {
            sock.send_all(impl->render_metrics());
            sock.shutdown_write();
        });
}

EdgeService::~EdgeService() {
    if (impl_) impl_->stop_all();
}

std::uint16_t EdgeService::port() const { return impl_->server->port(); }
std::uint16_t EdgeService::metrics_port() const { return impl_->metrics_server->port(); }

EdgeMetrics EdgeService::metrics() const {
    std::lock_guard<std::mutex> lock(impl_->state_mutex);
    return impl_->metrics;
}

void EdgeService::stop() { impl_->stop_all(); }

} // namespace synergy::edge

#pragma once

#include "synergy/config.hpp"
#include "synergy/model_backend.hpp"
#include "synergy/protocol.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <list>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace synergy::edge {

struct LocationProfile {
    std::string bs_id;
    std::string region_name;
    std::vector<std::string> facts; // single-sentence snippets, ordered
    std::uint32_t max_facts_per_prompt = 2;
};

// One profile per base station, loaded from a directory of config-format
// files (see configs/profiles/).
class ProfileStore {
public:
    static ProfileStore from_directory(const std::string& dir);

    void add(LocationProfile profile);
    // Unknown ids fall back to an empty profile so service degrades instead
    // of failing; the caller decides whether to log.
    const LocationProfile* find(const std::string& bs_id) const;
    std::size_t size() const { return profiles_.size(); }

private:
    std::map<std::string, LocationProfile> profiles_;
};

LocationProfile profile_from_config(const Config& cfg);

struct EdgeFineTuneSample {
    std::string concise;  // user-submitted short prompt
    std::string intended; // target comprehensive prompt
    std::string bs_id;
};

// Seeded generator for fine-tune corpora; composes concise prompts from
// region topic tables and expands them with the mock completer.
std::vector<EdgeFineTuneSample> generate_finetune_corpus(std::size_t n_samples,
                                                         std::uint64_t seed);
void write_corpus_tsv(const std::vector<EdgeFineTuneSample>& corpus, const std::string& path);
std::vector<EdgeFineTuneSample> read_corpus_tsv(const std::string& path);

// Synthetic region fact tables used by the corpus generator and the
// shipped profile files.
const std::vector<LocationProfile>& builtin_regions();

// Result of a de-duplication lookup.
struct Fresh {};
struct DuplicateOf {
    std::string request_id;
};
struct CachedResponse {
    std::string text;
};
using DedupDecision = std::variant<Fresh, DuplicateOf, CachedResponse>;

// Keyed by dedup hash; entries expire after ttl and the oldest completed
// entries are evicted first when capacity is reached. Not thread-safe by
// itself; the edge service serializes access.
class DedupCache {
public:
    using Clock = std::function<double()>; // seconds, monotonic

    DedupCache(double ttl_s, std::size_t capacity, Clock clock);

    // First occurrence registers the key as pending and returns Fresh.
    // Later occurrences return DuplicateOf{first request} while pending and
    // CachedResponse once a response is stored. Expired entries act fresh.
    DedupDecision lookup(const proto::PromptEnvelope& env);

    void store_response(std::uint64_t dedup_key, const std::string& response_text);
    // Requests queued behind the original; cleared by the call.
    std::vector<std::string> take_waiters(std::uint64_t dedup_key);
    // Forgets a key entirely (used when a forwarded request fails).
    void drop(std::uint64_t dedup_key);

    std::size_t size() const { return entries_.size(); }

private:
    struct Entry {
        std::string first_request_id;
        std::optional<std::string> response_text;
        std::vector<std::string> waiters;
        double created_at = 0;
    };

    void expire_and_evict();

    double ttl_s_;
    std::size_t capacity_;
    Clock clock_;
    std::unordered_map<std::uint64_t, Entry> entries_;
    std::list<std::uint64_t> insertion_order_; // front = oldest
};

// Prompt enhancement: concise -> comprehensive. The enhanced text always
// contains the concise text verbatim; on backend failure the concise text
// passes through at the comprehensive stage (degraded mode).
struct EnhanceResult {
    proto::PromptEnvelope envelope;
    double confidence = 0.0; // backend confidence (keyword coverage for mock)
    bool degraded = false;
};

EnhanceResult enhance(const proto::PromptEnvelope& env, const LocationProfile& profile,
                      backend::TextBackend& completer);

// Edge termination: answer locally when the backend's confidence for this
// request clears the threshold.
struct LocalDecision {
    bool respond_locally = false;
    proto::PromptEnvelope response; // valid when respond_locally
};

LocalDecision maybe_terminate(const proto::PromptEnvelope& comprehensive, double confidence,
                              backend::TextBackend& completer, double threshold);

// Pure batching rule shared with the live forwarder: a batch closes when
// the window elapses from its first element or it reaches max_batch.
struct TimedEnvelope {
    double time_s = 0;
    proto::PromptEnvelope envelope;
};

struct ForwardBatch {
    double close_time_s = 0;
    std::vector<proto::PromptEnvelope> envelopes;
};

std::vector<ForwardBatch> batch_forward(const std::vector<TimedEnvelope>& pending,
                                        double window_s, std::size_t max_batch);

// Counters surfaced on the metrics endpoint.
struct EdgeMetrics {
    std::uint64_t requests = 0;
    std::uint64_t dedup_hits = 0;
    std::uint64_t local_terminations = 0;
    std::uint64_t forwarded_batches = 0;
    std::uint64_t forwarded_requests = 0;
    std::uint64_t degraded_enhancements = 0;
    std::uint64_t unknown_bs = 0;

    std::string render() const;
};

struct EdgeServiceConfig {
    std::string listen_host = "127.0.0.1";
    std::uint16_t listen_port = 0;
    std::string metrics_host = "127.0.0.1";
    std::uint16_t metrics_port = 0;
    std::string cloud_host = "127.0.0.1";
    std::uint16_t cloud_port = 0;
    double batch_window_s = 0.05;
    std::size_t max_batch = 20;
    double dedup_ttl_s = 300;
    std::size_t dedup_capacity = 65536;
    double terminate_threshold = 0.9;
    proto::WorkflowGraph workflow;
};

EdgeServiceConfig edge_service_config_from(const Config& cfg);

// The live edge service; see src/edge_service.cpp.
class EdgeService {
public:
    EdgeService(EdgeServiceConfig cfg, ProfileStore profiles,
                std::unique_ptr<backend::TextBackend> completer);
    ~EdgeService();

    std::uint16_t port() const;
    std::uint16_t metrics_port() const;
    EdgeMetrics metrics() const;
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace synergy::edge

#pragma once

#include "synergy/config.hpp"
#include "synergy/cost_model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace synergy::sim {

// Time is integer nanoseconds end to end; doubles appear only at the
// parameter boundary and in reported statistics.
using Nanos = std::int64_t;

struct SimParams {
    std::uint64_t n_requests = 0;
    std::uint64_t concise_bytes = 0;
    std::uint64_t comprehensive_bytes = 0;
    cost::Links links;
    double cloud_infer_s_per_request = 0.0;
    double edge_infer_s_per_request = 0.0;
    double batch_window_s = 0.0;
    std::uint64_t max_batch = 1;
    double cloud_batch_speedup = 1.0; // >= 1
    double duplicate_fraction = 0.0;  // [0,1], Synergy only
    std::uint64_t rng_seed = 0;
    double arrival_jitter_s = 0.0;    // uniform in [0, jitter); 0 = simultaneous
    std::uint64_t split_payload_bytes = 0; // Splitting edge->cloud payload
    double split_fraction = 0.25;          // Splitting edge share of inference time

    void validate() const;
};

enum class EventKind : int {
    Arrive = 0,
    HandshakeDone = 1,
    DedupHit = 2,
    EdgeBatchStart = 3,
    EdgeDone = 4,
    ForwardStart = 5,
    CloudStart = 6,
    CloudDone = 7,
    Deliver = 8,
};

const char* event_kind_name(EventKind k);

struct SimEvent {
    Nanos time_ns = 0;
    EventKind kind = EventKind::Arrive;
    std::uint64_t request_id = 0;
};

struct SimTrace {
    cost::FrameworkKind framework = cost::FrameworkKind::CloudOnly;
    SimParams params;
    std::vector<SimEvent> events;             // ordered by (time, kind, id)
    double end_to_end_s = 0.0;                // max event time
    std::vector<double> per_request_latency;  // one entry per request
};

SimTrace simulate(cost::FrameworkKind framework, const SimParams& p);

struct SimSummary {
    std::uint64_t n_requests = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dedup_hits = 0;
    std::uint64_t forwarded = 0; // distinct requests with a ForwardStart
    double mean_latency_s = 0.0;
    double median_latency_s = 0.0;
    double p95_latency_s = 0.0;
    double end_to_end_s = 0.0;
    std::uint64_t bytes_end_edge = 0;
    std::uint64_t bytes_edge_cloud = 0;
    std::uint64_t total_bytes = 0;
    double edge_busy_s = 0.0;  // computing-plane bookkeeping
    double cloud_busy_s = 0.0;
};

// Statistics derived exactly from the event sequence and latency vector.
SimSummary summarize(const SimTrace& trace);

struct ComparisonRow {
    cost::FrameworkKind framework;
    SimSummary summary;
};

// Runs all four frameworks with shared params. Row order: cloud-only,
// offload, splitting, synergy.
std::vector<ComparisonRow> compare_frameworks(const SimParams& p);

// Line-delimited event log: "time_ns kind request_id". Stable for diffing.
std::string serialize_events(const SimTrace& trace);
// Full trace document: params header + event log.
std::string serialize_trace(const SimTrace& trace);
std::string render_summary_kv(const SimTrace& trace);
std::string render_comparison_table(const std::vector<ComparisonRow>& rows);

SimParams sim_params_from_config(const Config& cfg);

} // namespace synergy::sim

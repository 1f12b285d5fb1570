#include "synergy/latency_sim.hpp"

#include "synergy/error.hpp"
#include "synergy/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace synergy::sim {

namespace {

Nanos to_ns(double seconds) {
    return static_cast<Nanos>(std::llround(seconds * 1e9));
}

Nanos tx_ns(std::uint64_t bytes, const cost::LinkSpec& link) {
    return to_ns(static_cast<double>(bytes) * 8.0 / link.rate_bits_per_s);
}

struct Request {
    std::uint64_t id = 0;
    Nanos arrival_ns = 0;           // client-side arrival
    bool duplicate = false;
    std::uint64_t original = 0;     // root request this one duplicates
};

class TraceBuilder {
public:
    explicit TraceBuilder(std::uint64_t n) : latency_ns_(n, 0) {}

    void emit(Nanos t, EventKind kind, std::uint64_t id) {
        events_.push_back(SimEvent{t, kind, id});
    }

    void deliver(std::uint64_t id, Nanos arrival, Nanos done) {
        emit(done, EventKind::Deliver, id);
        latency_ns_[id] = done - arrival;
    }

    void absorb(std::uint64_t id, Nanos arrival, Nanos done) {
        latency_ns_[id] = done - arrival;
    }

    SimTrace finish(cost::FrameworkKind framework, const SimParams& p) {
        std::sort(events_.begin(), events_.end(), [](const SimEvent& a, const SimEvent& b) {
            if (a.time_ns != b.time_ns) return a.time_ns < b.time_ns;
            if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
            return a.request_id < b.request_id;
        });
        SimTrace trace;
        trace.framework = framework;
        trace.params = p;
        trace.events = std::move(events_);
        trace.end_to_end_s =
            trace.events.empty() ? 0.0 : static_cast<double>(trace.events.back().time_ns) / 1e9;
        trace.per_request_latency.reserve(latency_ns_.size());
        for (Nanos ns : latency_ns_) {
            trace.per_request_latency.push_back(static_cast<double>(ns) / 1e9);
        }
        return trace;
    }

private:
    std::vector<SimEvent> events_;
    std::vector<Nanos> latency_ns_;
};

// Draw order per request: jitter first (when enabled), then the duplicate
// decision, then the copied index. Changing this order changes traces, so
// it is part of the determinism contract.
std::vector<Request> draw_requests(const SimParams& p, bool with_duplicates) {
    SeededRng rng(p.rng_seed);
    const Nanos jitter_ns = to_ns(p.arrival_jitter_s);
    std::vector<Request> reqs(p.n_requests);
    for (std::uint64_t i = 0; i < p.n_requests; ++i) {
        reqs[i].id = i;
        if (jitter_ns > 0) {
            reqs[i].arrival_ns = static_cast<Nanos>(
                rng.bounded(static_cast<std::uint64_t>(jitter_ns)));
        }
        if (with_duplicates && i > 0 && rng.uniform01() < p.duplicate_fraction) {
            reqs[i].duplicate = true;
            std::uint64_t target = rng.bounded(i);
            // Copies of copies collapse onto the root original.
            while (reqs[target].duplicate) target = reqs[target].original;
            reqs[i].original = target;
        }
    }
    return reqs;
}

// Requests in channel order (arrival time, then id).
std::vector<std::uint64_t> channel_order(const std::vector<Request>& reqs) {
    std::vector<std::uint64_t> order(reqs.size());
    for (std::uint64_t i = 0; i < reqs.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&reqs](std::uint64_t a, std::uint64_t b) {
        if (reqs[a].arrival_ns != reqs[b].arrival_ns) {
            return reqs[a].arrival_ns < reqs[b].arrival_ns;
        }
        return a < b;
    });
    return order;
}

struct Batch {
    std::vector<std::uint64_t> ids;
    Nanos close_ns = 0;
};

// Greedy batching: a batch closes when the window elapses from its first
// element or it reaches max_batch, whichever comes first.
std::vector<Batch> plan_batches(const std::vector<std::pair<Nanos, std::uint64_t>>& entries,
                                Nanos window_ns, std::uint64_t max_batch) {
    std::vector<Batch> batches;
    std::size_t i = 0;
    while (i < entries.size()) {
        Batch b;
        const Nanos open = entries[i].first;
        const Nanos deadline = open + window_ns;
        while (i < entries.size() && b.ids.size() < max_batch && entries[i].first <= deadline) {
            b.ids.push_back(entries[i].second);
            ++i;
        }
        b.close_ns = b.ids.size() == max_batch ? entries[i - 1].first : deadline;
        batches.push_back(std::move(b));
    }
    return batches;
}

SimTrace simulate_cloud_only(const SimParams& p) {
    TraceBuilder tb(p.n_requests);
    const auto reqs = draw_requests(p, false);
    const Nanos hs = to_ns(p.links.edge_cloud.per_request_handshake_s);
    const Nanos tx1 = tx_ns(p.concise_bytes, p.links.edge_cloud);
    const Nanos infer = to_ns(p.cloud_infer_s_per_request);

    // A single end-to-cloud channel; every request pays its own connection
    // establishment before its payload. One cloud server, FIFO.
    Nanos channel_free = 0;
    Nanos server_free = 0;
    for (std::uint64_t id : channel_order(reqs)) {
        const Request& r = reqs[id];
        tb.emit(r.arrival_ns, EventKind::Arrive, id);
        const Nanos hs_done = std::max(channel_free, r.arrival_ns) + hs;
        tb.emit(hs_done, EventKind::HandshakeDone, id);
        const Nanos ch_done = hs_done + tx1;
        channel_free = ch_done;
        const Nanos start = std::max(server_free, ch_done);
        tb.emit(start, EventKind::CloudStart, id);
        const Nanos done = start + infer;
        tb.emit(done, EventKind::CloudDone, id);
        server_free = done;
        tb.deliver(id, r.arrival_ns, done);
    }
    return tb.finish(cost::FrameworkKind::CloudOnly, p);
}

SimTrace simulate_offload(const SimParams& p) {
    TraceBuilder tb(p.n_requests);
    const auto reqs = draw_requests(p, false);
    const Nanos hs = to_ns(p.links.end_edge.per_request_handshake_s);
    const Nanos tx1 = tx_ns(p.concise_bytes, p.links.end_edge);
    const Nanos infer = to_ns(p.edge_infer_s_per_request);

    Nanos channel_free = 0;
    Nanos server_free = 0;
    for (std::uint64_t id : channel_order(reqs)) {
        const Request& r = reqs[id];
        tb.emit(r.arrival_ns, EventKind::Arrive, id);
        const Nanos hs_done = std::max(channel_free, r.arrival_ns) + hs;
        tb.emit(hs_done, EventKind::HandshakeDone, id);
        const Nanos ch_done = hs_done + tx1;
        channel_free = ch_done;
        const Nanos start = std::max(server_free, ch_done);
        tb.emit(start, EventKind::EdgeBatchStart, id);
        const Nanos done = start + infer;
        tb.emit(done, EventKind::EdgeDone, id);
        server_free = done;
        tb.deliver(id, r.arrival_ns, done);
    }
    return tb.finish(cost::FrameworkKind::Offload, p);
}

SimTrace simulate_splitting(const SimParams& p) {
    TraceBuilder tb(p.n_requests);
    const auto reqs = draw_requests(p, false);
    const Nanos hs_e = to_ns(p.links.end_edge.per_request_handshake_s);
    const Nanos tx1 = tx_ns(p.concise_bytes, p.links.end_edge);
    const Nanos hs_ec = to_ns(p.links.edge_cloud.per_request_handshake_s);
    const Nanos tx_mid = tx_ns(p.split_payload_bytes, p.links.edge_cloud);
    const Nanos infer = to_ns(p.cloud_infer_s_per_request);
    const Nanos edge_share = to_ns(p.split_fraction * p.cloud_infer_s_per_request);
    const Nanos cloud_share = infer - edge_share;

    Nanos access_free = 0;
    Nanos edge_free = 0;
    Nanos fwd_free = 0;
    Nanos cloud_free = 0;
    bool fwd_connected = false; // one persistent edge->cloud connection
    for (std::uint64_t id : channel_order(reqs)) {
        const Request& r = reqs[id];
        tb.emit(r.arrival_ns, EventKind::Arrive, id);
        const Nanos hs_done = std::max(access_free, r.arrival_ns) + hs_e;
        tb.emit(hs_done, EventKind::HandshakeDone, id);
        const Nanos at_edge = hs_done + tx1;
        access_free = at_edge;
        const Nanos e_start = std::max(edge_free, at_edge);
        tb.emit(e_start, EventKind::EdgeBatchStart, id);
        const Nanos e_done = e_start + edge_share;
        tb.emit(e_done, EventKind::EdgeDone, id);
        edge_free = e_done;
        Nanos f_start = std::max(fwd_free, e_done);
        tb.emit(f_start, EventKind::ForwardStart, id);
        if (!fwd_connected) {
            f_start += hs_ec;
            fwd_connected = true;
        }
        const Nanos f_done = f_start + tx_mid;
        fwd_free = f_done;
        const Nanos c_start = std::max(cloud_free, f_done);
        tb.emit(c_start, EventKind::CloudStart, id);
        const Nanos c_done = c_start + cloud_share;
        tb.emit(c_done, EventKind::CloudDone, id);
        cloud_free = c_done;
        tb.deliver(id, r.arrival_ns, c_done);
    }
    return tb.finish(cost::FrameworkKind::Splitting, p);
}

SimTrace simulate_synergy(const SimParams& p) {
    TraceBuilder tb(p.n_requests);
    const auto reqs = draw_requests(p, true);
    const Nanos hs_e = to_ns(p.links.end_edge.per_request_handshake_s);
    const Nanos tx1 = tx_ns(p.concise_bytes, p.links.end_edge);
    const Nanos hs_ec = to_ns(p.links.edge_cloud.per_request_handshake_s);
    const Nanos tx_comp = tx_ns(p.comprehensive_bytes, p.links.edge_cloud);
    const Nanos edge_infer = to_ns(p.edge_infer_s_per_request);
    const Nanos window = to_ns(p.batch_window_s);
    const double cloud_per_req_ns = p.cloud_infer_s_per_request * 1e9 / p.cloud_batch_speedup;

    // Concise prompts cross the access link one at a time, then meet the
    // de-duplication filter.
    Nanos access_free = 0;
    std::vector<std::pair<Nanos, std::uint64_t>> uniques; // (edge arrival, id)
    std::vector<Nanos> edge_arrival(p.n_requests, 0);
    for (std::uint64_t id : channel_order(reqs)) {
        const Request& r = reqs[id];
        tb.emit(r.arrival_ns, EventKind::Arrive, id);
        const Nanos hs_done = std::max(access_free, r.arrival_ns) + hs_e;
        tb.emit(hs_done, EventKind::HandshakeDone, id);
        const Nanos at_edge = hs_done + tx1;
        access_free = at_edge;
        edge_arrival[id] = at_edge;
        if (r.duplicate) {
            tb.emit(at_edge, EventKind::DedupHit, id);
        } else {
            uniques.emplace_back(at_edge, id);
        }
    }

    // Duplicates answered when their original's batch delivers.
    std::map<std::uint64_t, std::vector<std::uint64_t>> copies;
    for (const Request& r : reqs) {
        if (r.duplicate) copies[r.original].push_back(r.id);
    }

    const auto batches = plan_batches(uniques, window, p.max_batch);
    Nanos edge_free = 0;
    Nanos fwd_free = 0;
    Nanos cloud_free = 0;
    bool fwd_connected = false;
    for (const Batch& b : batches) {
        const Nanos e_start = std::max(edge_free, b.close_ns);
        const Nanos e_done = e_start + static_cast<Nanos>(b.ids.size()) * edge_infer;
        edge_free = e_done;
        Nanos f_start = std::max(fwd_free, e_done);
        for (std::uint64_t id : b.ids) {
            tb.emit(e_start, EventKind::EdgeBatchStart, id);
            tb.emit(e_done, EventKind::EdgeDone, id);
            tb.emit(f_start, EventKind::ForwardStart, id);
        }
        Nanos f_done = f_start + static_cast<Nanos>(b.ids.size()) * tx_comp;
        if (!fwd_connected) {
            f_done += hs_ec;
            fwd_connected = true;
        }
        fwd_free = f_done;
        const Nanos c_start = std::max(cloud_free, f_done);
        const Nanos c_done =
            c_start + static_cast<Nanos>(std::llround(
                          static_cast<double>(b.ids.size()) * cloud_per_req_ns));
        cloud_free = c_done;
        for (std::uint64_t id : b.ids) {
            tb.emit(c_start, EventKind::CloudStart, id);
            tb.emit(c_done, EventKind::CloudDone, id);
            tb.deliver(id, reqs[id].arrival_ns, c_done);
            for (std::uint64_t dup : copies[id]) {
                tb.absorb(dup, reqs[dup].arrival_ns, c_done);
            }
        }
    }
    return tb.finish(cost::FrameworkKind::Synergy, p);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

} // namespace

void SimParams::validate() const {
    if (cloud_infer_s_per_request < 0 || edge_infer_s_per_request < 0 || batch_window_s < 0 ||
        arrival_jitter_s < 0) {
        throw_error(ErrorCode::InvalidArgument, "sim: times must be >= 0");
    }
    if (cloud_batch_speedup < 1.0) {
        throw_error(ErrorCode::InvalidArgument, "sim: cloud_batch_speedup must be >= 1");
    }
    if (duplicate_fraction < 0.0 || duplicate_fraction > 1.0) {
        throw_error(ErrorCode::InvalidArgument, "sim: duplicate_fraction must lie in [0,1]");
    }
    if (max_batch == 0) {
        throw_error(ErrorCode::InvalidArgument, "sim: max_batch must be >= 1");
    }
    if (split_fraction <= 0.0 || split_fraction >= 1.0) {
        throw_error(ErrorCode::InvalidArgument, "sim: split_fraction must lie in (0,1)");
    }
    links.end_edge.validate("sim end_edge link");
    links.edge_cloud.validate("sim edge_cloud link");
}

const char* event_kind_name(EventKind k) {
    switch (k) {
        case EventKind::Arrive: return "arrive";
        case EventKind::HandshakeDone: return "handshake_done";
        case EventKind::DedupHit: return "dedup_hit";
        case EventKind::EdgeBatchStart: return "edge_batch_start";
        case EventKind::EdgeDone: return "edge_done";
        case EventKind::ForwardStart: return "forward_start";
        case EventKind::CloudStart: return "cloud_start";
        case EventKind::CloudDone: return "cloud_done";
        case EventKind::Deliver: return "deliver";
    }
    return "unknown";
}

SimTrace simulate(cost::FrameworkKind framework, const SimParams& p) {
    p.validate();
    switch (framework) {
        case cost::FrameworkKind::CloudOnly: return simulate_cloud_only(p);
        case cost::FrameworkKind::Offload: return simulate_offload(p);
        case cost::FrameworkKind::Splitting: return simulate_splitting(p);
        case cost::FrameworkKind::Synergy: return simulate_synergy(p);
    }
    throw_error(ErrorCode::InvalidArgument, "unknown framework kind");
}

SimSummary summarize(const SimTrace& trace) {
    SimSummary s;
    s.n_requests = trace.params.n_requests;
    s.end_to_end_s = trace.end_to_end_s;

    std::set<std::uint64_t> forwarded_ids;
    std::set<std::pair<Nanos, Nanos>> edge_busy, cloud_busy;
    std::map<std::uint64_t, Nanos> edge_start, cloud_start;
    for (const SimEvent& e : trace.events) {
        switch (e.kind) {
            case EventKind::Deliver: ++s.delivered; break;
            case EventKind::DedupHit: ++s.dedup_hits; break;
            case EventKind::ForwardStart: forwarded_ids.insert(e.request_id); break;
            case EventKind::EdgeBatchStart: edge_start[e.request_id] = e.time_ns; break;
            case EventKind::EdgeDone:
                edge_busy.emplace(edge_start[e.request_id], e.time_ns);
                break;
            case EventKind::CloudStart: cloud_start[e.request_id] = e.time_ns; break;
            case EventKind::CloudDone:
                cloud_busy.emplace(cloud_start[e.request_id], e.time_ns);
                break;
            default: break;
        }
    }
    s.forwarded = forwarded_ids.size();
    for (const auto& [b, e] : edge_busy) s.edge_busy_s += static_cast<double>(e - b) / 1e9;
    for (const auto& [b, e] : cloud_busy) s.cloud_busy_s += static_cast<double>(e - b) / 1e9;

    const SimParams& p = trace.params;
    const std::uint64_t n = p.n_requests;
    switch (trace.framework) {
        case cost::FrameworkKind::CloudOnly:
            s.bytes_edge_cloud = n * p.concise_bytes;
            break;
        case cost::FrameworkKind::Offload:
            s.bytes_end_edge = n * p.concise_bytes;
            break;
        case cost::FrameworkKind::Splitting:
            s.bytes_end_edge = n * p.concise_bytes;
            s.bytes_edge_cloud = s.forwarded * p.split_payload_bytes;
            break;
        case cost::FrameworkKind::Synergy:
            s.bytes_end_edge = n * p.concise_bytes;
            s.bytes_edge_cloud = s.forwarded * p.comprehensive_bytes;
            break;
    }
    s.total_bytes = s.bytes_end_edge + s.bytes_edge_cloud;

    if (!trace.per_request_latency.empty()) {
        std::vector<double> sorted = trace.per_request_latency;
        std::sort(sorted.begin(), sorted.end());
        double sum = 0;
        for (double v : sorted) sum += v;
        s.mean_latency_s = sum / static_cast<double>(sorted.size());
        const std::size_t m = sorted.size();
        s.median_latency_s =
            m % 2 == 1 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
        // Nearest-rank p95.
        const std::size_t rank = (m * 95 + 99) / 100;
        s.p95_latency_s = sorted[rank == 0 ? 0 : rank - 1];
    }
    return s;
}

std::vector<ComparisonRow> compare_frameworks(const SimParams& p) {
    std::vector<ComparisonRow> rows;
    for (auto kind : {cost::FrameworkKind::CloudOnly, cost::FrameworkKind::Offload,
                      cost::FrameworkKind::Splitting, cost::FrameworkKind::Synergy}) {
        rows.push_back(ComparisonRow{kind, summarize(simulate(kind, p))});
    }
    return rows;
}

std::string serialize_events(const SimTrace& trace) {
    std::ostringstream os;
    for (const SimEvent& e : trace.events) {
        os << e.time_ns << ' ' << event_kind_name(e.kind) << ' ' << e.request_id << '\n';
    }
    return os.str();
}

std::string serialize_trace(const SimTrace& trace) {
    const SimParams& p = trace.params;
    std::ostringstream os;
    os << "framework=" << cost::framework_name(trace.framework) << '\n'
       << "n_requests=" << p.n_requests << '\n'
       << "concise_bytes=" << p.concise_bytes << '\n'
       << "comprehensive_bytes=" << p.comprehensive_bytes << '\n'
       << "cloud_infer_s_per_request=" << format_double(p.cloud_infer_s_per_request) << '\n'
       << "edge_infer_s_per_request=" << format_double(p.edge_infer_s_per_request) << '\n'
       << "batch_window_s=" << format_double(p.batch_window_s) << '\n'
       << "max_batch=" << p.max_batch << '\n'
       << "cloud_batch_speedup=" << format_double(p.cloud_batch_speedup) << '\n'
       << "duplicate_fraction=" << format_double(p.duplicate_fraction) << '\n'
       << "rng_seed=" << p.rng_seed << '\n'
       << "events=" << trace.events.size() << '\n'
       << serialize_events(trace);
    return os.str();
}

std::string render_summary_kv(const SimTrace& trace) {
    const SimSummary s = summarize(trace);
    std::ostringstream os;
    os << "framework=" << cost::framework_name(trace.framework) << '\n'
       << "n_requests=" << s.n_requests << '\n'
       << "delivered=" << s.delivered << '\n'
       << "dedup_hits=" << s.dedup_hits << '\n'
       << "forwarded=" << s.forwarded << '\n'
       << "end_to_end_s=" << format_double(s.end_to_end_s) << '\n'
       << "mean_latency_s=" << format_double(s.mean_latency_s) << '\n'
       << "median_latency_s=" << format_double(s.median_latency_s) << '\n'
       << "p95_latency_s=" << format_double(s.p95_latency_s) << '\n'
       << "bytes_end_edge=" << s.bytes_end_edge << '\n'
       << "bytes_edge_cloud=" << s.bytes_edge_cloud << '\n'
       << "total_bytes=" << s.total_bytes << '\n'
       << "edge_busy_s=" << format_double(s.edge_busy_s) << '\n'
       << "cloud_busy_s=" << format_double(s.cloud_busy_s) << '\n';
    return os.str();
}

std::string render_comparison_table(const std::vector<ComparisonRow>& rows) {
    std::ostringstream os;
    os << "framework    end_to_end_s  mean_s    p95_s     total_bytes  dedup_hits\n";
    for (const auto& row : rows) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-12s %-13.2f %-9.2f %-9.2f %-12llu %llu\n",
                      cost::framework_name(row.framework), row.summary.end_to_end_s,
                      row.summary.mean_latency_s, row.summary.p95_latency_s,
                      static_cast<unsigned long long>(row.summary.total_bytes),
                      static_cast<unsigned long long>(row.summary.dedup_hits));
        os << line;
    }
    return os.str();
}

SimParams sim_params_from_config(const Config& cfg) {
    SimParams p;
    p.n_requests = cfg.get_uint("sim.n_requests");
    p.concise_bytes = cfg.get_uint("sim.concise_bytes");
    p.comprehensive_bytes = cfg.get_uint("sim.comprehensive_bytes");
    p.links.end_edge.rate_bits_per_s = cfg.get_double("link.end_edge.rate_bits_per_s");
    p.links.end_edge.per_request_handshake_s =
        cfg.get_double_or("link.end_edge.per_request_handshake_s", 0.0);
    p.links.edge_cloud.rate_bits_per_s = cfg.get_double("link.edge_cloud.rate_bits_per_s");
    p.links.edge_cloud.per_request_handshake_s =
        cfg.get_double_or("link.edge_cloud.per_request_handshake_s", 0.0);
    p.cloud_infer_s_per_request = cfg.get_double("sim.cloud_infer_s_per_request");
    p.edge_infer_s_per_request = cfg.get_double("sim.edge_infer_s_per_request");
    p.batch_window_s = cfg.get_double("sim.batch_window_s");
    p.max_batch = cfg.get_uint("sim.max_batch");
    p.cloud_batch_speedup = cfg.get_double("sim.cloud_batch_speedup");
    p.duplicate_fraction = cfg.get_double("sim.duplicate_fraction");
    p.rng_seed = cfg.get_uint("sim.rng_seed");
    p.arrival_jitter_s = cfg.get_double_or("sim.arrival_jitter_s", 0.0);
    p.split_payload_bytes = cfg.get_uint("sim.split_payload_bytes");
    p.split_fraction = cfg.get_double_or("sim.split_fraction", 0.25);
    p.validate();
    return p;
}

} // namespace synergy::sim

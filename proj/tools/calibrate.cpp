// Solves for the simulator defaults that reproduce the headline end-to-end
// latencies (cloud-only 20.19 s, synergy 3.35 s for 100 concurrent 12-byte
// prompts at 1 Gbps). The fitted values are reconstructions: the scenario
// fixes the workload and the targets, not the service times, so we pick a
// round cloud service time and per-request handshake, then solve the edge
// service time for the synergy target. Output is pasted into
// configs/defaults.paper.conf.

#include "synergy/latency_sim.hpp"

#include <cmath>
#include <cstdio>

using namespace synergy;

namespace {

sim::SimParams base_params() {
    sim::SimParams p;
    p.n_requests = 100;
    p.concise_bytes = 12;
    p.comprehensive_bytes = 95;
    p.links.end_edge = {1e9, 0.0};
    p.links.edge_cloud = {1e9, 0.19}; // chosen: a WAN-scale connection setup
    p.cloud_infer_s_per_request = 0.2; // chosen: round large-model service time
    p.edge_infer_s_per_request = 0.1;  // solved below
    p.batch_window_s = 0.05;
    p.max_batch = 20;
    p.cloud_batch_speedup = 4.0; // chosen: batched decoding advantage
    p.duplicate_fraction = 0.8;  // matches the de-duplicated transfer volume
    p.rng_seed = 1;
    p.split_payload_bytes = 16384;
    p.split_fraction = 0.25;
    return p;
}

double synergy_end(double edge_infer) {
    sim::SimParams p = base_params();
    p.edge_infer_s_per_request = edge_infer;
    return sim::simulate(cost::FrameworkKind::Synergy, p).end_to_end_s;
}

} // namespace

int main() {
    const double target_cloud = 20.19;
    const double target_synergy = 3.35;

    sim::SimParams p = base_params();
    const double cloud_end =
        sim::simulate(cost::FrameworkKind::CloudOnly, p).end_to_end_s;
    std::printf("cloud-only with handshake %.3f s and service %.3f s: %.9f s "
                "(target %.2f, error %.5f%%)\n",
                p.links.edge_cloud.per_request_handshake_s, p.cloud_infer_s_per_request,
                cloud_end, target_cloud, 100.0 * std::abs(cloud_end - target_cloud) / target_cloud);

    // The synergy makespan is monotone increasing in the edge service time.
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (synergy_end(mid) < target_synergy) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double exact = 0.5 * (lo + hi);
    // Ship a 9-digit rounding of the solved value.
    const double fitted = std::round(exact * 1e9) / 1e9;
    const double achieved = synergy_end(fitted);
    std::printf("synergy edge service time: solved %.12f, shipped %.9f -> %.9f s "
                "(target %.2f, error %.5f%%)\n",
                exact, fitted, achieved, target_synergy,
                100.0 * std::abs(achieved - target_synergy) / target_synergy);

    std::printf("\n# paste into configs/defaults.paper.conf ([sim] section)\n");
    std::printf("cloud_infer_s_per_request = %.9g\n", p.cloud_infer_s_per_request);
    std::printf("edge_infer_s_per_request = %.9f\n", fitted);
    std::printf("batch_window_s = %.9g\n", p.batch_window_s);
    std::printf("max_batch = %llu\n", static_cast<unsigned long long>(p.max_batch));
    std::printf("cloud_batch_speedup = %.9g\n", p.cloud_batch_speedup);
    std::printf("duplicate_fraction = %.9g\n", p.duplicate_fraction);
    return 0;
}

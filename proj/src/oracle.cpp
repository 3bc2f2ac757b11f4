#include "netlat/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace netlat::oracle {

LinkLoadTable compute_link_loads(const NetworkSnapshot& snapshot) {
  LinkLoadTable table;
  for (int i = 0; i < static_cast<int>(snapshot.traffic.pairs.size()); ++i) {
    const auto& dem = snapshot.traffic.pairs[static_cast<std::size_t>(i)];
    for (const auto& hop : trajectory(snapshot, i)) {
      auto& entry = table[hop];
      entry.summed_traffic += dem.mean_rate;
    }
  }
  for (auto& [link, entry] : table) {
    entry.capacity = snapshot.topology.capacity(link.u, link.v);
    entry.utilization = entry.summed_traffic / entry.capacity;
  }
  return table;
}

PerformanceMatrix ground_truth(const NetworkSnapshot& snapshot, double mean_packet_size) {
  const LinkLoadTable loads = compute_link_loads(snapshot);
  for (const auto& [link, entry] : loads) {
    if (entry.utilization >= 1.0) {
      throw UnstableLinkError("link " + std::to_string(link.u) + "->" + std::to_string(link.v) +
                              " has utilization " + std::to_string(entry.utilization));
    }
  }

  PerformanceMatrix perf;
  std::map<DirectedLink, double> sojourn;  // W per used link, seconds
  for (const auto& [link, entry] : loads) {
    const double lambda = entry.summed_traffic / mean_packet_size;  // packets/s
    const double mu = entry.capacity / mean_packet_size;
    sojourn[link] = 1.0 / (mu - lambda);
    perf.link_occupancy[link] = entry.utilization / (1.0 - entry.utilization);
  }

  perf.path_latency.reserve(snapshot.traffic.pairs.size());
  for (int i = 0; i < static_cast<int>(snapshot.traffic.pairs.size()); ++i) {
    double latency = 0.0;
    for (const auto& hop : trajectory(snapshot, i)) latency += sojourn.at(hop);
    perf.path_latency.push_back(latency);
  }
  return perf;
}

double little_check(const LinkLoadTable& loads, const PerformanceMatrix& performance,
                    double mean_packet_size) {
  double worst = 0.0;
  for (const auto& [link, entry] : loads) {
    const double lambda = entry.summed_traffic / mean_packet_size;
    const double mu = entry.capacity / mean_packet_size;
    const double w = 1.0 / (mu - lambda);
    const double expected = lambda * w;  // Little's law: L = lambda * W
    const double occupancy = performance.link_occupancy.at(link);
    worst = std::max(worst, std::abs(occupancy - expected) / expected);
  }
  return worst;
}

NetworkSnapshot generate_snapshot(const SnapshotParams& params, std::uint64_t seed) {
  constexpr int kMaxRetries = 20;
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    const std::uint64_t s = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(attempt);
    NetworkSnapshot snapshot;
    snapshot.topology = generate_topology(params.n, params.mean_degree, params.capacity_levels, s);
    snapshot.routing = generate_routing(snapshot.topology);
    const int k = std::max(1, static_cast<int>(std::lround(params.pairs_per_node * params.n)));
    snapshot.traffic = generate_traffic(snapshot.topology, snapshot.routing, k,
                                        params.max_utilization, s ^ 0x5851F42D4C957F2DULL);
    try {
      snapshot.performance = ground_truth(snapshot, params.mean_packet_size);
    } catch (const UnstableLinkError&) {
      continue;  // resample
    }
    return snapshot;
  }
  throw UnstableLinkError("generate_snapshot: no stable draw after " +
                          std::to_string(kMaxRetries) + " attempts");
}

}  // namespace netlat::oracle

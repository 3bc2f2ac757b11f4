#pragma once

#include <map>

#include "netlat/netmodel.hpp"

namespace netlat::oracle {

struct LinkLoad {
  double summed_traffic = 0.0;  // traffic units/s over all trajectories using the link
  double utilization = 0.0;     // summed_traffic / capacity
  double capacity = 0.0;
};

// directed links traversed by at least one trajectory; untraversed links are absent
using LinkLoadTable = std::map<DirectedLink, LinkLoad>;

LinkLoadTable compute_link_loads(const NetworkSnapshot& snapshot);

// Per-link M/M/1 queues fed by the summed mean traffic: occupancy rho/(1-rho),
// sojourn time 1/(mu-lambda) in packets/s, path latency = sum of hop sojourn times.
PerformanceMatrix ground_truth(const NetworkSnapshot& snapshot, double mean_packet_size = 1000.0);

// max over links of |L - lambda*W| / (lambda*W); identically ~0 for M/M/1
double little_check(const LinkLoadTable& loads, const PerformanceMatrix& performance,
                    double mean_packet_size = 1000.0);

// one topology + routing + traffic + ground truth; unstable draws are resampled
struct SnapshotParams {
  int n = 25;
  double mean_degree = 9.778;
  std::vector<double> capacity_levels = {10000.0, 25000.0, 40000.0, 100000.0};
  double pairs_per_node = 2.0;
  double max_utilization = 0.95;
  double mean_packet_size = 1000.0;
};

NetworkSnapshot generate_snapshot(const SnapshotParams& params, std::uint64_t seed);

}  // namespace netlat::oracle

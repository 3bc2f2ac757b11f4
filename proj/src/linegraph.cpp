#include "netlat/linegraph.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace netlat::linegraph {

LineGraph build_line_graph(const NetworkSnapshot& snapshot) {
  const int n = snapshot.topology.n;
  LineGraph lg;

  // lnodes = valid routings: (x, y) such that next_hop(x, d) = y for some d
  std::set<DirectedLink> valid;
  for (int c = 0; c < n; ++c) {
    for (int d = 0; d < n; ++d) {
      if (c == d) continue;
      valid.insert({c, snapshot.routing.next_hop(c, d)});
    }
  }
  lg.lnodes.assign(valid.begin(), valid.end());
  for (int i = 0; i < static_cast<int>(lg.lnodes.size()); ++i) lg.index_[lg.lnodes[i]] = i;

  // ledges connect consecutive directed links, never an immediate reversal
  std::vector<std::vector<int>> by_tail(static_cast<std::size_t>(n));
  for (int i = 0; i < static_cast<int>(lg.lnodes.size()); ++i) {
    by_tail[static_cast<std::size_t>(lg.lnodes[i].u)].push_back(i);
  }
  for (int s = 0; s < static_cast<int>(lg.lnodes.size()); ++s) {
    const auto& link = lg.lnodes[static_cast<std::size_t>(s)];
    for (int d : by_tail[static_cast<std::size_t>(link.v)]) {
      if (lg.lnodes[static_cast<std::size_t>(d)].v == link.u) continue;  // reversal
      lg.ledges.push_back({s, d, 0.0});
    }
  }

  lg.trajectories.reserve(snapshot.traffic.pairs.size());
  for (int p = 0; p < static_cast<int>(snapshot.traffic.pairs.size()); ++p) {
    std::vector<int> traj;
    for (const auto& hop : trajectory(snapshot, p)) {
      const int idx = lg.lnode_index(hop.u, hop.v);
      if (idx < 0) {
        throw ValidationError("trajectory hop " + std::to_string(hop.u) + "->" +
                              std::to_string(hop.v) + " is not a valid routing");
      }
      traj.push_back(idx);
    }
    lg.trajectories.push_back(std::move(traj));
  }

  const auto loads = oracle::compute_link_loads(snapshot);
  lg.node_features = node_features(lg, snapshot, loads);
  const Eigen::VectorXd w = edge_weights(lg, snapshot, loads);
  for (int e = 0; e < static_cast<int>(lg.ledges.size()); ++e) {
    lg.ledges[static_cast<std::size_t>(e)].weight = w(e);
  }
  return lg;
}

Eigen::MatrixXd node_features(const LineGraph& lg, const NetworkSnapshot& snapshot,
                              const oracle::LinkLoadTable& loads) {
  const int count = static_cast<int>(lg.lnodes.size());
  double max_capacity = 0.0;
  for (double c : snapshot.topology.link_capacity) max_capacity = std::max(max_capacity, c);

  // summed peak throughput per directed link, same bookkeeping as the mean loads
  std::map<DirectedLink, double> peak_sum;
  for (std::size_t p = 0; p < lg.trajectories.size(); ++p) {
    const double peak = snapshot.traffic.pairs[p].peak_rate;
    for (int idx : lg.trajectories[p]) peak_sum[lg.lnodes[static_cast<std::size_t>(idx)]] += peak;
  }

  Eigen::MatrixXd features = Eigen::MatrixXd::Zero(count, 3);
  for (int i = 0; i < count; ++i) {
    const auto& link = lg.lnodes[static_cast<std::size_t>(i)];
    const double cap = snapshot.topology.capacity(link.u, link.v);
    auto it = loads.find(link);
    features(i, 0) = it == loads.end() ? 0.0 : it->second.summed_traffic / cap;
    features(i, 1) = cap / max_capacity;
    auto pk = peak_sum.find(link);
    features(i, 2) = pk == peak_sum.end() ? 0.0 : pk->second / cap;
  }
  return features;
}

Eigen::VectorXd edge_weights(const LineGraph& lg, const NetworkSnapshot& snapshot,
                             const oracle::LinkLoadTable& loads) {
  // traffic continuing through each consecutive lnode pair; for loop-free routes
  // this equals the "both links in the trajectory" reading of the numerator
  std::map<std::pair<int, int>, double> continuing;
  for (std::size_t p = 0; p < lg.trajectories.size(); ++p) {
    const auto& traj = lg.trajectories[p];
    const double rate = snapshot.traffic.pairs[p].mean_rate;
    for (std::size_t h = 0; h + 1 < traj.size(); ++h) {
      continuing[{traj[h], traj[h + 1]}] += rate;
    }
  }

  Eigen::VectorXd weights(static_cast<int>(lg.ledges.size()));
  for (int e = 0; e < static_cast<int>(lg.ledges.size()); ++e) {
    const auto& edge = lg.ledges[static_cast<std::size_t>(e)];
    const auto& src_link = lg.lnodes[static_cast<std::size_t>(edge.src)];
    const auto& dst_link = lg.lnodes[static_cast<std::size_t>(edge.dst)];
    auto load_it = loads.find(src_link);
    const double summed = load_it == loads.end() ? 0.0 : load_it->second.summed_traffic;
    if (summed <= 0.0) {
      weights(e) = 0.0;
      continue;
    }
    auto cont_it = continuing.find({edge.src, edge.dst});
    const double through = cont_it == continuing.end() ? 0.0 : cont_it->second;
    const double cap_ratio = snapshot.topology.capacity(src_link.u, src_link.v) /
                             snapshot.topology.capacity(dst_link.u, dst_link.v);
    weights(e) = through / summed * cap_ratio;
  }
  return weights;
}

DirectedLink project_back(const LineGraph& lg, int lnode_index) {
  if (lnode_index < 0 || lnode_index >= static_cast<int>(lg.lnodes.size())) {
    throw ValidationError("project_back: lnode index " + std::to_string(lnode_index) +
                          " out of range");
  }
  return lg.lnodes[static_cast<std::size_t>(lnode_index)];
}

}  // namespace netlat::linegraph

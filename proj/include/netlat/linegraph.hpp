#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "netlat/netmodel.hpp"
#include "netlat/oracle.hpp"

namespace netlat::linegraph {

struct LineEdge {
  int src = 0;  // lnode indices
  int dst = 0;
  double weight = 0.0;
};

// Directed line graph over the valid-routing directed links of the base graph.
// lnodes doubles as the back-projection: lnodes[i] is the base link of lnode i.
struct LineGraph {
  std::vector<DirectedLink> lnodes;
  std::vector<LineEdge> ledges;
  Eigen::MatrixXd node_features;               // L x 3: utilization, capacity/max, peak/capacity
  std::vector<std::vector<int>> trajectories;  // per OD pair, ordered lnode indices

  int lnode_index(int u, int v) const {
    auto it = index_.find({u, v});
    return it == index_.end() ? -1 : it->second;
  }

  std::map<DirectedLink, int> index_;
};

// Structure, trajectories, node features, and edge weights in one pass.
// Works with or without ground truth; loads are derived from traffic alone.
LineGraph build_line_graph(const NetworkSnapshot& snapshot);

// feature columns: [0] summed traffic / capacity, [1] capacity / max snapshot capacity,
// [2] summed peak throughput / capacity; untraversed lnodes get zeros in [0] and [2]
Eigen::MatrixXd node_features(const LineGraph& lg, const NetworkSnapshot& snapshot,
                              const oracle::LinkLoadTable& loads);

// per-ledge weight: traffic continuing s->d as a fraction of s's summed traffic,
// times the capacity ratio cap(s)/cap(d); zero when s carries no traffic
Eigen::VectorXd edge_weights(const LineGraph& lg, const NetworkSnapshot& snapshot,
                             const oracle::LinkLoadTable& loads);

DirectedLink project_back(const LineGraph& lg, int lnode_index);

}  // namespace netlat::linegraph

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "netlat/linegraph.hpp"

namespace netlat::roles {

struct RoleAssignment {
  int n_roles = 0;               // requested cluster count
  int effective_roles = 0;       // clusters that ended up non-empty
  std::vector<int> role_of;      // per lnode, in [0, n_roles)
};

// unordered same-role lnode pairs that co-occur on some trajectory; kept sorted,
// each pair stored once with first < second
struct RoleAdjacency {
  std::vector<std::pair<int, int>> pairs;
};

// Recursive structural features: per-lnode degree/egonet base block plus
// `rounds` levels of mean- and sum-aggregation over line-graph neighbors,
// then near-duplicate columns (|corr| > 0.99) pruned keeping the lowest index.
Eigen::MatrixXd structural_features(const linegraph::LineGraph& lg, int rounds = 2);

// Seeded k-means++ on z-scored features. Operates on the sorted multiset of
// feature rows, so the outcome is invariant to lnode relabeling.
RoleAssignment assign_roles(const Eigen::MatrixXd& features, int n_roles, std::uint64_t seed);

RoleAdjacency build_role_adjacency(const linegraph::LineGraph& lg, const RoleAssignment& roles);

}  // namespace netlat::roles

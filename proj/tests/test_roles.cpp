#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "netlat/roles.hpp"
#include "testutil.hpp"

using namespace netlat;

TEST_CASE("structural features: isolated lnodes are all zero") {
  NetworkSnapshot s;
  s.topology = testutil::make_topology(2, {{0, 1}}, {10.0});
  s.routing = generate_routing(s.topology);
  const auto lg = linegraph::build_line_graph(s);  // two lnodes, no ledges
  const auto f = roles::structural_features(lg);
  CHECK(f.rows() == 2);
  CHECK(f.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("structural features: rotational symmetry gives identical rows") {
  NetworkSnapshot s;
  s.topology = testutil::make_topology(3, {{0, 1}, {0, 2}, {1, 2}}, {10.0, 10.0, 10.0});
  s.routing = generate_routing(s.topology);
  s.traffic.pairs = {{0, 1, 2.0, 2.0}, {1, 2, 2.0, 2.0}, {2, 0, 2.0, 2.0},
                     {1, 0, 2.0, 2.0}, {2, 1, 2.0, 2.0}, {0, 2, 2.0, 2.0}};
  const auto lg = linegraph::build_line_graph(s);
  const auto f = roles::structural_features(lg);
  for (Eigen::Index r = 1; r < f.rows(); ++r) {
    CHECK((f.row(r) - f.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("structural features: hub-origin lnode out-ranks a leaf-origin lnode") {
  // star: center 0, leaves 1..4; lnode (0 -> 1) is fed by all (k -> 0) links,
  // lnode (1 -> 0) receives nothing (its only feed would be a reversal)
  NetworkSnapshot s;
  s.topology = testutil::make_topology(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}},
                                       {10.0, 10.0, 10.0, 10.0});
  s.routing = generate_routing(s.topology);
  const auto lg = linegraph::build_line_graph(s);
  const auto f = roles::structural_features(lg);
  const int hub_origin = lg.lnode_index(0, 1);
  const int leaf_origin = lg.lnode_index(1, 0);
  // column 0 is the in-degree and survives pruning as the lowest index
  CHECK(f(hub_origin, 0) == 3.0);
  CHECK(f(hub_origin, 0) > f(leaf_origin, 0));
}

TEST_CASE("feature column count and pruning") {
  const auto s = testutil::random_snapshot(11, 5, 9);
  const auto lg = linegraph::build_line_graph(s);
  const auto f = roles::structural_features(lg, 2);
  CHECK(f.cols() <= 5 * ((1 << 3) - 1));  // 35 columns before pruning
  CHECK(f.cols() >= 1);
  // no two surviving columns nearly identical
  for (Eigen::Index i = 0; i < f.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < f.cols(); ++j) {
      Eigen::VectorXd a = f.col(i).array() - f.col(i).mean();
      Eigen::VectorXd b = f.col(j).array() - f.col(j).mean();
      const double na = a.norm(), nb = b.norm();
      if (na < 1e-12 || nb < 1e-12) continue;
      CHECK(std::abs(a.dot(b)) / (na * nb) <= 0.99 + 1e-9);
    }
  }
}

TEST_CASE("assign_roles: degenerate, separated, and deterministic cases") {
  SUBCASE("identical features collapse to one effective role") {
    Eigen::MatrixXd f = Eigen::MatrixXd::Ones(6, 3);
    const auto roles = roles::assign_roles(f, 3, 1);
    CHECK(roles.effective_roles == 1);
    for (int r : roles.role_of) CHECK(r == roles.role_of[0]);
  }
  SUBCASE("clearly separated clusters split perfectly") {
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(8, 2);
    for (int i = 4; i < 8; ++i) f.row(i).setConstant(100.0);
    const auto roles = roles::assign_roles(f, 2, 7);
    CHECK(roles.effective_roles == 2);
    for (int i = 1; i < 4; ++i) CHECK(roles.role_of[static_cast<std::size_t>(i)] == roles.role_of[0]);
    for (int i = 5; i < 8; ++i) CHECK(roles.role_of[static_cast<std::size_t>(i)] == roles.role_of[4]);
    CHECK(roles.role_of[0] != roles.role_of[4]);
  }
  SUBCASE("fixed seed is reproducible") {
    Eigen::MatrixXd f(5, 2);
    f << 0, 1, 2, 3, 4, 5, 6, 7, 8, 9;
    const auto a = roles::assign_roles(f, 3, 42);
    const auto b = roles::assign_roles(f, 3, 42);
    CHECK(a.role_of == b.role_of);
  }
}

TEST_CASE("role adjacency: same role and shared trajectory are both required") {
  linegraph::LineGraph lg;
  lg.lnodes = {{0, 1}, {1, 2}, {2, 3}, {3, 4}};
  lg.trajectories = {{0, 1}, {2}, {3}};
  roles::RoleAssignment assignment;
  assignment.n_roles = 2;
  assignment.effective_roles = 2;

  SUBCASE("same role, same trajectory") {
    assignment.role_of = {0, 0, 1, 1};
    const auto adj = roles::build_role_adjacency(lg, assignment);
    REQUIRE(adj.pairs.size() == 1);
    CHECK(adj.pairs[0] == std::pair<int, int>{0, 1});
  }
  SUBCASE("same role, no shared trajectory") {
    assignment.role_of = {0, 1, 0, 0};
    const auto adj = roles::build_role_adjacency(lg, assignment);
    CHECK(adj.pairs.empty());  // lnodes 2 and 3 never co-occur
  }
  SUBCASE("different roles, same trajectory") {
    assignment.role_of = {0, 1, 0, 1};
    const auto adj = roles::build_role_adjacency(lg, assignment);
    CHECK(adj.pairs.empty());
  }
}

TEST_CASE("role adjacency invariants and brute-force equivalence") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto s = testutil::random_snapshot(seed, 3, 6);
    const auto lg = linegraph::build_line_graph(s);
    const auto f = roles::structural_features(lg);
    const auto assignment = roles::assign_roles(f, 3, 5);
    const auto adj = roles::build_role_adjacency(lg, assignment);

    std::set<std::pair<int, int>> co_trajectory;
    for (const auto& traj : lg.trajectories) {
      for (std::size_t i = 0; i < traj.size(); ++i) {
        for (std::size_t j = i + 1; j < traj.size(); ++j) {
          co_trajectory.insert({std::min(traj[i], traj[j]), std::max(traj[i], traj[j])});
        }
      }
    }
    for (const auto& [a, b] : adj.pairs) {
      CHECK(a < b);  // unordered pairs stored once, zero diagonal
      CHECK(co_trajectory.count({a, b}) == 1);
    }
    const auto brute = testutil::brute_role_adjacency(lg, assignment);
    CHECK(std::set<std::pair<int, int>>(adj.pairs.begin(), adj.pairs.end()) == brute);
  }
}

TEST_CASE("permutation equivariance of features, assignment, and adjacency") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = testutil::random_snapshot(seed, 4, 8);
    const auto lg = linegraph::build_line_graph(s);
    const int count = static_cast<int>(lg.lnodes.size());
    std::vector<int> perm(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) perm[static_cast<std::size_t>(i)] = i;
    Rng rng(seed * 31 + 7);
    rng.shuffle(perm);
    const auto permuted = testutil::permute_linegraph(lg, perm);

    const auto f = roles::structural_features(lg);
    const auto fp = roles::structural_features(permuted);
    REQUIRE(f.cols() == fp.cols());
    for (int i = 0; i < count; ++i) {
      CHECK((fp.row(perm[static_cast<std::size_t>(i)]) - f.row(i)).cwiseAbs().maxCoeff() < 1e-12);
    }

    const auto roles_a = roles::assign_roles(f, 4, 9);
    const auto roles_b = roles::assign_roles(fp, 4, 9);
    for (int i = 0; i < count; ++i) {
      CHECK(roles_b.role_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] ==
            roles_a.role_of[static_cast<std::size_t>(i)]);
    }

    const auto adj_a = roles::build_role_adjacency(lg, roles_a);
    const auto adj_b = roles::build_role_adjacency(permuted, roles_b);
    std::set<std::pair<int, int>> mapped;
    for (const auto& [a, b] : adj_a.pairs) {
      const int pa = perm[static_cast<std::size_t>(a)];
      const int pb = perm[static_cast<std::size_t>(b)];
      mapped.insert({std::min(pa, pb), std::max(pa, pb)});
    }
    CHECK(std::set<std::pair<int, int>>(adj_b.pairs.begin(), adj_b.pairs.end()) == mapped);
  }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "netlat/linegraph.hpp"
#include "testutil.hpp"

using namespace netlat;
using linegraph::build_line_graph;

TEST_CASE("line graph of a path: four lnodes, two non-reversing ledges") {
  NetworkSnapshot s = testutil::path_snapshot();
  const auto lg = build_line_graph(s);
  REQUIRE(lg.lnodes.size() == 4);
  std::set<DirectedLink> nodes(lg.lnodes.begin(), lg.lnodes.end());
  CHECK(nodes == std::set<DirectedLink>{{0, 1}, {1, 0}, {1, 2}, {2, 1}});
  REQUIRE(lg.ledges.size() == 2);
  std::set<std::pair<DirectedLink, DirectedLink>> edges;
  for (const auto& e : lg.ledges) {
    edges.insert({lg.lnodes[static_cast<std::size_t>(e.src)],
                  lg.lnodes[static_cast<std::size_t>(e.dst)]});
  }
  CHECK(edges == std::set<std::pair<DirectedLink, DirectedLink>>{{{0, 1}, {1, 2}},
                                                                 {{2, 1}, {1, 0}}});
}

TEST_CASE("line graph of a single link: reversal exclusion leaves no ledges") {
  NetworkSnapshot s;
  s.topology = testutil::make_topology(2, {{0, 1}}, {10.0});
  s.routing = generate_routing(s.topology);
  const auto lg = build_line_graph(s);
  CHECK(lg.lnodes.size() == 2);
  CHECK(lg.ledges.empty());
}

TEST_CASE("line graph of a triangle: six lnodes, six ledges") {
  NetworkSnapshot s;
  s.topology = testutil::make_topology(3, {{0, 1}, {0, 2}, {1, 2}}, {10.0, 10.0, 10.0});
  s.routing = generate_routing(s.topology);
  const auto lg = build_line_graph(s);
  CHECK(lg.lnodes.size() == 6);
  CHECK(lg.ledges.size() == 6);
}

TEST_CASE("node features: direct utilization ratios") {
  SUBCASE("single demand over one link") {
    NetworkSnapshot s;
    s.topology = testutil::make_topology(2, {{0, 1}}, {10.0});
    s.routing = generate_routing(s.topology);
    s.traffic.pairs = {{0, 1, 5.0, 5.0}};
    const auto lg = build_line_graph(s);
    const int idx = lg.lnode_index(0, 1);
    CHECK(lg.node_features(idx, 0) == doctest::Approx(0.5).epsilon(1e-12));
    const int rev = lg.lnode_index(1, 0);
    CHECK(lg.node_features(rev, 0) == 0.0);  // untraversed
  }
  SUBCASE("two demands share a link") {
    NetworkSnapshot s = testutil::path_snapshot(100.0, 20.0);
    s.traffic.pairs = {{0, 2, 5.0, 5.0}, {1, 2, 3.0, 3.0}};
    const auto lg = build_line_graph(s);
    CHECK(lg.node_features(lg.lnode_index(1, 2), 0) == doctest::Approx(0.4).epsilon(1e-12));
  }
}

TEST_CASE("node features: capacity and peak channels") {
  NetworkSnapshot s = testutil::path_snapshot(10.0, 40.0);
  s.traffic.pairs = {{0, 2, 5.0, 8.0}};
  const auto lg = build_line_graph(s);
  CHECK(lg.node_features(lg.lnode_index(0, 1), 1) == doctest::Approx(10.0 / 40.0));
  CHECK(lg.node_features(lg.lnode_index(1, 2), 1) == doctest::Approx(1.0));
  CHECK(lg.node_features(lg.lnode_index(0, 1), 2) == doctest::Approx(8.0 / 10.0));
}

TEST_CASE("edge weights: capacity ratio and traffic split") {
  SUBCASE("single pair continuing") {
    NetworkSnapshot s = testutil::path_snapshot(10.0, 20.0);
    s.traffic.pairs = {{0, 2, 5.0, 5.0}};
    const auto lg = build_line_graph(s);
    for (const auto& e : lg.ledges) {
      if (lg.lnodes[static_cast<std::size_t>(e.src)] == DirectedLink{0, 1} &&
          lg.lnodes[static_cast<std::size_t>(e.dst)] == DirectedLink{1, 2}) {
        CHECK(e.weight == doctest::Approx(0.5).epsilon(1e-12));
      }
    }
  }
  SUBCASE("one pair continues, one terminates") {
    NetworkSnapshot s = testutil::path_snapshot(10.0, 20.0);
    s.traffic.pairs = {{0, 2, 5.0, 5.0}, {0, 1, 3.0, 3.0}};
    const auto lg = build_line_graph(s);
    for (const auto& e : lg.ledges) {
      if (lg.lnodes[static_cast<std::size_t>(e.src)] == DirectedLink{0, 1} &&
          lg.lnodes[static_cast<std::size_t>(e.dst)] == DirectedLink{1, 2}) {
        CHECK(e.weight == doctest::Approx(0.3125).epsilon(1e-12));
      }
    }
  }
  SUBCASE("equal capacities, all traffic continues") {
    NetworkSnapshot s = testutil::path_snapshot(10.0, 10.0);
    s.traffic.pairs = {{0, 2, 5.0, 5.0}};
    const auto lg = build_line_graph(s);
    for (const auto& e : lg.ledges) {
      if (lg.lnodes[static_cast<std::size_t>(e.src)] == DirectedLink{0, 1}) {
        CHECK(e.weight == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("project_back: identity, bijectivity, range check") {
  const auto s = testutil::random_snapshot(3, 4, 8);
  const auto lg = build_line_graph(s);
  std::set<DirectedLink> seen;
  for (int i = 0; i < static_cast<int>(lg.lnodes.size()); ++i) {
    const auto link = linegraph::project_back(lg, i);
    CHECK(lg.lnode_index(link.u, link.v) == i);
    CHECK(seen.insert(link).second);  // injective
  }
  CHECK_THROWS_AS(linegraph::project_back(lg, static_cast<int>(lg.lnodes.size())),
                  ValidationError);
  CHECK_THROWS_AS(linegraph::project_back(lg, -1), ValidationError);
}

TEST_CASE("structural properties over random snapshots") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto s = testutil::random_snapshot(seed, 3, 12);
    const auto lg = build_line_graph(s);

    CHECK(lg.lnodes.size() <= 2 * s.topology.links.size());

    // ledges connect head to tail and never reverse
    for (const auto& e : lg.ledges) {
      const auto& a = lg.lnodes[static_cast<std::size_t>(e.src)];
      const auto& b = lg.lnodes[static_cast<std::size_t>(e.dst)];
      CHECK(a.v == b.u);
      CHECK(b.v != a.u);
      CHECK(e.weight >= 0.0);
      CHECK(std::isfinite(e.weight));
    }

    // trajectory lift: consecutive trajectory lnodes are line-graph adjacent
    std::set<std::pair<int, int>> edge_set;
    for (const auto& e : lg.ledges) edge_set.insert({e.src, e.dst});
    for (const auto& traj : lg.trajectories) {
      for (std::size_t h = 0; h + 1 < traj.size(); ++h) {
        CHECK(edge_set.count({traj[h], traj[h + 1]}) == 1);
      }
    }
  }
}

TEST_CASE("outgoing traffic fractions sum to at most one under equal capacities") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    oracle::SnapshotParams params;
    params.n = rng.uniform_int(4, 10);
    params.mean_degree = rng.uniform(2.0, std::min(3.5, params.n - 1.0));
    params.capacity_levels = {10000.0};  // single level so the capacity ratio is 1
    const auto s = oracle::generate_snapshot(params, rng.next_u64());
    const auto lg = build_line_graph(s);
    const auto loads = oracle::compute_link_loads(s);

    std::vector<double> out_sum(lg.lnodes.size(), 0.0);
    for (const auto& e : lg.ledges) out_sum[static_cast<std::size_t>(e.src)] += e.weight;
    std::set<int> heads_with_termination;
    for (int p = 0; p < static_cast<int>(s.traffic.pairs.size()); ++p) {
      const auto& traj = lg.trajectories[static_cast<std::size_t>(p)];
      heads_with_termination.insert(traj.back());
    }
    for (int i = 0; i < static_cast<int>(lg.lnodes.size()); ++i) {
      if (loads.count(lg.lnodes[static_cast<std::size_t>(i)]) == 0) continue;
      CHECK(out_sum[static_cast<std::size_t>(i)] <= 1.0 + 1e-12);
      if (!heads_with_termination.count(i)) {
        CHECK(out_sum[static_cast<std::size_t>(i)] == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("brute-force equivalence of the feature and weight formulas") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto s = testutil::random_snapshot(seed, 3, 6);
    const auto lg = build_line_graph(s);
    for (int i = 0; i < static_cast<int>(lg.lnodes.size()); ++i) {
      const double expected = testutil::brute_node_feature(s, lg.lnodes[static_cast<std::size_t>(i)]);
      CHECK(lg.node_features(i, 0) == doctest::Approx(expected).epsilon(1e-12));
    }
    for (const auto& e : lg.ledges) {
      const double expected =
          testutil::brute_edge_weight(s, lg.lnodes[static_cast<std::size_t>(e.src)],
                                      lg.lnodes[static_cast<std::size_t>(e.dst)]);
      CHECK(e.weight == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

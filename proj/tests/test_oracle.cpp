#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "netlat/oracle.hpp"
#include "testutil.hpp"

using namespace netlat;

namespace {

// path 0-1-2, capacities in traffic units/s
NetworkSnapshot two_hop(double cap01, double cap12, double demand) {
  NetworkSnapshot s = testutil::path_snapshot(cap01, cap12);
  s.traffic.pairs = {{0, 2, demand, demand}};
  return s;
}

}  // namespace

TEST_CASE("compute_link_loads: single pair puts its demand on every hop") {
  const auto s = two_hop(10000.0, 10000.0, 5.0);
  const auto loads = oracle::compute_link_loads(s);
  REQUIRE(loads.size() == 2);
  CHECK(loads.at({0, 1}).summed_traffic == 5.0);
  CHECK(loads.at({1, 2}).summed_traffic == 5.0);
  CHECK(loads.at({0, 1}).utilization == doctest::Approx(5.0 / 10000.0));
}

TEST_CASE("compute_link_loads: demands sum per link, unused directions absent") {
  NetworkSnapshot s = testutil::path_snapshot(10000.0, 20.0);
  s.traffic.pairs = {{0, 2, 5.0, 5.0}, {1, 2, 3.0, 3.0}};
  const auto loads = oracle::compute_link_loads(s);
  CHECK(loads.at({1, 2}).summed_traffic == 8.0);
  CHECK(loads.count({2, 1}) == 0);
  CHECK(loads.count({1, 0}) == 0);
}

TEST_CASE("ground_truth: textbook single-queue numbers") {
  // lambda = 5 pkt/s, mu = 10 pkt/s with packet size 1000
  NetworkSnapshot s;
  s.topology = testutil::make_topology(2, {{0, 1}}, {10000.0});
  s.routing = generate_routing(s.topology);
  s.traffic.pairs = {{0, 1, 5000.0, 5000.0}};
  const auto perf = oracle::ground_truth(s, 1000.0);
  REQUIRE(perf.path_latency.size() == 1);
  CHECK(perf.path_latency[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(perf.link_occupancy.at({0, 1}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ground_truth: path latency sums hop sojourn times") {
  const auto s = two_hop(10000.0, 10000.0, 5000.0);
  const auto perf = oracle::ground_truth(s, 1000.0);
  CHECK(perf.path_latency[0] == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("ground_truth: unstable link is rejected by name") {
  const auto s = two_hop(10000.0, 5000.0, 5000.0);  // second hop at rho = 1
  CHECK_THROWS_WITH_AS(oracle::ground_truth(s, 1000.0), doctest::Contains("1->2"),
                       UnstableLinkError);
}

TEST_CASE("little_check: identity holds, corruption is caught") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto s = testutil::random_snapshot(seed, 3, 8);
    const auto loads = oracle::compute_link_loads(s);
    auto perf = oracle::ground_truth(s);
    CHECK(oracle::little_check(loads, perf) < 1e-12);
    auto& first = perf.link_occupancy.begin()->second;
    first *= 2.0;
    CHECK(oracle::little_check(loads, perf) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("path latency equals the exact sum of its hop delays") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto s = testutil::random_snapshot(seed, 3, 8);
    const auto loads = oracle::compute_link_loads(s);
    const auto perf = oracle::ground_truth(s, 1000.0);
    for (int p = 0; p < static_cast<int>(s.traffic.pairs.size()); ++p) {
      double sum = 0.0;
      for (const auto& hop : trajectory(s, p)) {
        const auto& entry = loads.at(hop);
        sum += 1.0 / (entry.capacity / 1000.0 - entry.summed_traffic / 1000.0);
      }
      CHECK(perf.path_latency[static_cast<std::size_t>(p)] == sum);  // bitwise
    }
  }
}

TEST_CASE("flow conservation: interior nodes relay exactly what they receive") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto s = testutil::random_snapshot(seed, 4, 10);
    // per-pair bookkeeping: every interior node of a trajectory has exactly one
    // inbound and one outbound hop carrying that pair
    for (int p = 0; p < static_cast<int>(s.traffic.pairs.size()); ++p) {
      const auto hops = trajectory(s, p);
      std::map<int, int> in_count, out_count;
      for (const auto& hop : hops) {
        out_count[hop.u] += 1;
        in_count[hop.v] += 1;
      }
      const auto& pair = s.traffic.pairs[static_cast<std::size_t>(p)];
      for (const auto& [node, c] : in_count) {
        if (node == pair.dst) continue;
        CHECK(c == 1);
        CHECK(out_count[node] == 1);
      }
    }
  }
}

TEST_CASE("monotonicity: raising one demand never lowers occupancy or latency") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto s = testutil::random_snapshot(seed, 4, 8);
    const auto before = oracle::ground_truth(s);
    auto& pair = s.traffic.pairs[seed % s.traffic.pairs.size()];
    pair.mean_rate *= 1.02;  // cap is 0.95, small bump keeps queues stable
    const auto after = oracle::ground_truth(s);
    for (const auto& [link, occ] : before.link_occupancy) {
      CHECK(after.link_occupancy.at(link) >= occ - 1e-15);
    }
    for (std::size_t p = 0; p < before.path_latency.size(); ++p) {
      CHECK(after.path_latency[p] >= before.path_latency[p] - 1e-15);
    }
  }
}

TEST_CASE("generate_snapshot: ships stable ground truth") {
  oracle::SnapshotParams params;
  params.n = 12;
  params.mean_degree = 3.0;
  const auto s = oracle::generate_snapshot(params, 99);
  REQUIRE(s.performance.has_value());
  CHECK(s.performance->path_latency.size() == s.traffic.pairs.size());
  for (double v : s.performance->path_latency) CHECK(v > 0.0);
  CHECK_NOTHROW(validate(s));
}

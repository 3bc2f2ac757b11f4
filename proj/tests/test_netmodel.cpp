#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "netlat/netmodel.hpp"
#include "netlat/rng.hpp"
#include "testutil.hpp"

using namespace netlat;

TEST_CASE("generate_topology: triangle is the only 3-node graph with degree 2") {
  const auto topo = generate_topology(3, 2.0, {10.0}, 0);
  CHECK(topo.n == 3);
  CHECK(topo.links.size() == 3);
  for (double c : topo.link_capacity) CHECK(c == 10.0);
  CHECK(topo.mean_degree() == doctest::Approx(2.0));
}

TEST_CASE("generate_topology: training-set degree statistics") {
  const auto topo = generate_topology(25, 9.778, {10000.0, 25000.0, 40000.0}, 7);
  CHECK(topo.mean_degree() >= 8.3);
  CHECK(topo.mean_degree() <= 11.2);
  std::set<double> caps(topo.link_capacity.begin(), topo.link_capacity.end());
  for (double c : caps) {
    CHECK((c == 10000.0 || c == 25000.0 || c == 40000.0));
  }
}

TEST_CASE("generate_topology: infeasible degree is rejected") {
  CHECK_THROWS_AS(generate_topology(3, 5.0, {10.0}, 0), ValidationError);
  CHECK_THROWS_AS(generate_topology(2, 1.0, {10.0}, 0), ValidationError);
  CHECK_THROWS_AS(generate_topology(5, 3.0, {}, 0), ValidationError);
  CHECK_THROWS_AS(generate_topology(5, 3.0, {-1.0}, 0), ValidationError);
  CHECK_THROWS_AS(generate_topology(10, 50.0, {10.0}, 0), ValidationError);
}

TEST_CASE("generate_topology: deterministic and connected") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const auto a = generate_topology(12, 3.5, {10.0, 20.0}, seed);
    const auto b = generate_topology(12, 3.5, {10.0, 20.0}, seed);
    CHECK(a.links == b.links);
    CHECK(a.link_capacity == b.link_capacity);
    CHECK_NOTHROW(generate_routing(a));  // throws on disconnected input
  }
}

TEST_CASE("generate_routing: forced path") {
  const auto topo = testutil::make_topology(3, {{0, 1}, {1, 2}}, {10.0, 10.0});
  const auto routing = generate_routing(topo);
  CHECK(routing.next_hop(0, 2) == 1);
  CHECK(routing.next_hop(1, 2) == 2);
  CHECK(routing.next_hop(0, 0) == -1);
}

TEST_CASE("generate_routing: direct edge beats two hops on a triangle") {
  const auto topo = testutil::make_topology(3, {{0, 1}, {0, 2}, {1, 2}}, {10.0, 10.0, 10.0});
  const auto routing = generate_routing(topo);
  CHECK(routing.next_hop(0, 2) == 2);
}

TEST_CASE("generate_routing: 4-cycle tie broken by smaller neighbor id") {
  const auto topo =
      testutil::make_topology(4, {{0, 1}, {0, 3}, {1, 2}, {2, 3}}, {10.0, 10.0, 10.0, 10.0});
  const auto routing = generate_routing(topo);
  // both 0-1-2 and 0-3-2 are two hops
  CHECK(routing.next_hop(0, 2) == 1);
}

TEST_CASE("routing termination on generated instances") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 100);
    const int n = rng.uniform_int(3, 50);
    const auto topo = generate_topology(n, std::min(4.0, n - 1.0), {10000.0}, seed);
    const auto routing = generate_routing(topo);
    for (int c = 0; c < n; ++c) {
      for (int d = 0; d < n; ++d) {
        if (c == d) continue;
        const auto hops = walk_route(topo, routing, c, d);  // throws on a loop
        CHECK(hops.size() < static_cast<std::size_t>(n));
      }
    }
  }
}

TEST_CASE("trajectory examples") {
  NetworkSnapshot s = testutil::path_snapshot();
  s.traffic.pairs = {{0, 2, 5.0, 5.0}, {0, 1, 3.0, 3.0}};
  const auto t1 = trajectory(s, 0);
  REQUIRE(t1.size() == 2);
  CHECK(t1[0] == DirectedLink{0, 1});
  CHECK(t1[1] == DirectedLink{1, 2});
  const auto t2 = trajectory(s, 1);
  REQUIRE(t2.size() == 1);
  CHECK(t2[0] == DirectedLink{0, 1});
  CHECK_THROWS_AS(trajectory(s, 2), ValidationError);
}

TEST_CASE("trajectory on the 4-cycle follows the tie rule") {
  NetworkSnapshot s;
  s.topology =
      testutil::make_topology(4, {{0, 1}, {0, 3}, {1, 2}, {2, 3}}, {10.0, 10.0, 10.0, 10.0});
  s.routing = generate_routing(s.topology);
  s.traffic.pairs = {{0, 2, 1.0, 1.0}};
  const auto t = trajectory(s, 0);
  REQUIRE(t.size() == 2);
  CHECK(t[0] == DirectedLink{0, 1});
  CHECK(t[1] == DirectedLink{1, 2});
}

TEST_CASE("trajectory consistency on random snapshots") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto s = testutil::random_snapshot(seed, 3, 10);
    for (int p = 0; p < static_cast<int>(s.traffic.pairs.size()); ++p) {
      const auto hops = trajectory(s, p);
      REQUIRE(!hops.empty());
      CHECK(hops.front().u == s.traffic.pairs[static_cast<std::size_t>(p)].src);
      CHECK(hops.back().v == s.traffic.pairs[static_cast<std::size_t>(p)].dst);
      for (std::size_t h = 0; h + 1 < hops.size(); ++h) CHECK(hops[h].v == hops[h + 1].u);
    }
  }
}

TEST_CASE("corrupt routing matrix raises a loop error") {
  NetworkSnapshot s = testutil::path_snapshot();
  s.traffic.pairs = {{0, 2, 5.0, 5.0}};
  s.routing.next_hop(1, 2) = 0;  // 0 -> 1 -> 0 -> ... never reaches 2
  CHECK_THROWS_AS(trajectory(s, 0), RoutingLoopError);
}

TEST_CASE("generate_traffic: utilization cap holds") {
  const auto topo = generate_topology(3, 2.0, {10.0}, 0);
  const auto routing = generate_routing(topo);
  const auto traffic = generate_traffic(topo, routing, 1, 0.9, 0);
  REQUIRE(traffic.pairs.size() == 1);
  CHECK(traffic.pairs[0].mean_rate > 0.0);
  CHECK(traffic.pairs[0].peak_rate >= traffic.pairs[0].mean_rate);
  CHECK(traffic.pairs[0].mean_rate <= 0.9 * 10.0 + 1e-12);
}

TEST_CASE("generate_traffic: per-link load never exceeds the cap") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = testutil::random_snapshot(seed, 4, 12, false);
    std::map<DirectedLink, double> load;
    for (int p = 0; p < static_cast<int>(s.traffic.pairs.size()); ++p) {
      for (const auto& hop : trajectory(s, p)) {
        load[hop] += s.traffic.pairs[static_cast<std::size_t>(p)].mean_rate;
      }
    }
    for (const auto& [link, sum] : load) {
      CHECK(sum <= 0.95 * s.topology.capacity(link.u, link.v) + 1e-9);
    }
  }
}

TEST_CASE("generate_traffic: duplicates allowed once distinct pairs run out") {
  const auto topo = testutil::make_topology(2, {{0, 1}}, {100.0});
  const auto routing = generate_routing(topo);
  const auto traffic = generate_traffic(topo, routing, 3, 0.9, 5);
  CHECK(traffic.pairs.size() == 3);
  std::set<std::pair<int, int>> distinct;
  for (const auto& p : traffic.pairs) distinct.insert({p.src, p.dst});
  CHECK(distinct.size() == 2);  // only (0,1) and (1,0) exist
  CHECK_THROWS_AS(generate_traffic(topo, routing, 1, 1.5, 0), ValidationError);
}

TEST_CASE("serialization: round-trip identity on 200 random snapshots") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto s = testutil::random_snapshot(seed, 3, 6, seed % 2 == 0);
    const std::string bytes = save_snapshot(s);
    const auto loaded = load_snapshot(bytes);
    CHECK(save_snapshot(loaded) == bytes);
  }
}

TEST_CASE("serialization: identical seeds give byte-identical snapshots") {
  const auto a = testutil::random_snapshot(123, 4, 8);
  const auto b = testutil::random_snapshot(123, 4, 8);
  CHECK(save_snapshot(a) == save_snapshot(b));
}

TEST_CASE("load_snapshot: validation errors name the violated invariant") {
  const auto base = testutil::random_snapshot(7, 3, 4);
  auto j = nlohmann::json::parse(save_snapshot(base));

  SUBCASE("negative capacity") {
    j["topology"]["links"][0][2] = -1.0;
    CHECK_THROWS_WITH_AS(load_snapshot(j.dump()), doctest::Contains("capacity > 0"),
                         ValidationError);
  }
  SUBCASE("next hop not a neighbor") {
    const int n = j["topology"]["n"].get<int>();
    // point (0, n-1) at a node that is certainly not adjacent: itself
    j["routing"][0][n - 1] = 0;
    CHECK_THROWS_AS(load_snapshot(j.dump()), ValidationError);
  }
  SUBCASE("malformed JSON") { CHECK_THROWS_AS(load_snapshot("{not json"), ParseError); }
  SUBCASE("missing keys") { CHECK_THROWS_AS(load_snapshot("{}"), ParseError); }
  SUBCASE("disconnected graph") {
    const std::string bytes =
        R"({"topology": {"n": 4, "links": [[0,1,10.0],[2,3,10.0]]},)"
        R"( "traffic": [[0,1,1.0,1.0]],)"
        R"( "routing": [[-1,1,0,0],[0,-1,0,0],[3,3,-1,3],[2,2,2,-1]]})";
    CHECK_THROWS_WITH_AS(load_snapshot(bytes), doctest::Contains("connected"), ValidationError);
  }
}

TEST_CASE("dataset files: JSONL round trip") {
  std::vector<NetworkSnapshot> set;
  for (std::uint64_t seed = 0; seed < 5; ++seed) set.push_back(testutil::random_snapshot(seed));
  std::stringstream buffer;
  save_dataset(set, buffer);
  const auto loaded = load_dataset(buffer);
  REQUIRE(loaded.size() == set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    CHECK(save_snapshot(loaded[i]) == save_snapshot(set[i]));
  }
}

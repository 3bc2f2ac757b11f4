#pragma once

#include <Eigen/Dense>
#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "netlat/errors.hpp"

namespace netlat {

// A directed use of an undirected link, tail u -> head v.
struct DirectedLink {
  int u = 0;
  int v = 0;
  auto operator<=>(const DirectedLink&) const = default;
};

struct NetworkTopology {
  int n = 0;                                   // node ids are 0..n-1
  std::vector<std::array<int, 2>> links;       // undirected, stored with u < v
  std::vector<double> link_capacity;           // traffic units/s, parallel to links
  std::vector<std::vector<double>> node_attrs; // optional routing configuration, may be empty

  int link_index(int u, int v) const;          // -1 if absent (either orientation)
  double capacity(int u, int v) const;         // throws ValidationError if absent
  std::vector<std::vector<int>> adjacency() const;  // sorted neighbor lists
  double mean_degree() const { return n > 0 ? 2.0 * static_cast<double>(links.size()) / n : 0.0; }
};

struct OdDemand {
  int src = 0;
  int dst = 0;
  double mean_rate = 0.0;  // traffic units/s
  double peak_rate = 0.0;
};

struct TrafficMatrix {
  std::vector<OdDemand> pairs;
};

struct RoutingMatrix {
  // next_hop(c, d) = next node on the route from c toward d; -1 on the diagonal
  Eigen::MatrixXi next_hop;
};

struct PerformanceMatrix {
  std::vector<double> path_latency;              // seconds, parallel to traffic pairs
  std::map<DirectedLink, double> link_occupancy; // mean queue occupancy per used directed link
};

struct NetworkSnapshot {
  NetworkTopology topology;
  TrafficMatrix traffic;
  RoutingMatrix routing;
  std::optional<PerformanceMatrix> performance;  // absent at inference time
};

NetworkTopology generate_topology(int n, double target_mean_degree,
                                  const std::vector<double>& capacity_levels,
                                  std::uint64_t seed);

// all-pairs hop-count shortest paths, ties broken by smallest neighbor id
RoutingMatrix generate_routing(const NetworkTopology& topology);

// k OD pairs; demands rescaled so no link exceeds max_utilization of its capacity
TrafficMatrix generate_traffic(const NetworkTopology& topology, const RoutingMatrix& routing,
                               int k, double max_utilization, std::uint64_t seed);

// ordered directed links from source to destination of the given pair
std::vector<DirectedLink> trajectory(const NetworkSnapshot& snapshot, int pair_index);
std::vector<DirectedLink> walk_route(const NetworkTopology& topology, const RoutingMatrix& routing,
                                     int src, int dst);

void validate(const NetworkSnapshot& snapshot);

NetworkSnapshot load_snapshot(const std::string& bytes);
std::string save_snapshot(const NetworkSnapshot& snapshot);

// JSON Lines, one snapshot per line
std::vector<NetworkSnapshot> load_dataset(std::istream& in);
std::vector<NetworkSnapshot> load_dataset_file(const std::string& path);
void save_dataset(const std::vector<NetworkSnapshot>& snapshots, std::ostream& out);
void save_dataset_file(const std::vector<NetworkSnapshot>& snapshots, const std::string& path);

}  // namespace netlat

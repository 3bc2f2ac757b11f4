#include "netlat/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "netlat/rng.hpp"

namespace netlat {

using json = nlohmann::json;

int NetworkTopology::link_index(int u, int v) const {
  if (u > v) std::swap(u, v);
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (links[i][0] == u && links[i][1] == v) return static_cast<int>(i);
  }
  return -1;
}

double NetworkTopology::capacity(int u, int v) const {
  const int idx = link_index(u, v);
  if (idx < 0) {
    throw ValidationError("no link between node " + std::to_string(u) + " and node " +
                          std::to_string(v));
  }
  return link_capacity[static_cast<std::size_t>(idx)];
}

std::vector<std::vector<int>> NetworkTopology::adjacency() const {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (const auto& l : links) {
    adj[static_cast<std::size_t>(l[0])].push_back(l[1]);
    adj[static_cast<std::size_t>(l[1])].push_back(l[0]);
  }
  for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());
  return adj;
}

namespace {

bool is_connected(int n, const std::vector<std::array<int, 2>>& links) {
  if (n <= 0) return false;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (const auto& l : links) {
    adj[static_cast<std::size_t>(l[0])].push_back(l[1]);
    adj[static_cast<std::size_t>(l[1])].push_back(l[0]);
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  int reached = 1;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : adj[static_cast<std::size_t>(u)]) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++reached;
        queue.push_back(v);
      }
    }
  }
  return reached == n;
}

}  // namespace

NetworkTopology generate_topology(int n, double target_mean_degree,
                                  const std::vector<double>& capacity_levels,
                                  std::uint64_t seed) {
  if (n < 3) throw ValidationError("generate_topology: n must be >= 3");
  if (capacity_levels.empty()) throw ValidationError("generate_topology: capacity_levels empty");
  for (double c : capacity_levels) {
    if (!(c > 0.0)) throw ValidationError("generate_topology: capacity level must be > 0");
  }
  if (target_mean_degree > static_cast<double>(n - 1)) {
    throw ValidationError("generate_topology: target mean degree " +
                          std::to_string(target_mean_degree) + " exceeds n-1");
  }

  const long max_links = static_cast<long>(n) * (n - 1) / 2;
  long m = std::lround(static_cast<double>(n) * target_mean_degree / 2.0);
  m = std::min(m, max_links);
  m = std::max(m, static_cast<long>(n - 1));  // connectivity floor
  const double achieved = 2.0 * static_cast<double>(m) / n;
  if (std::abs(achieved - target_mean_degree) > 0.15 * target_mean_degree) {
    throw ValidationError("generate_topology: mean degree " + std::to_string(target_mean_degree) +
                          " infeasible for n=" + std::to_string(n));
  }

  Rng rng(seed);
  NetworkTopology topo;
  topo.n = n;

  // random spanning tree, then extra edges sampled from the remaining pairs
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  std::set<std::pair<int, int>> used;
  auto add_link = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    used.insert({a, b});
    topo.links.push_back({a, b});
  };
  for (int i = 1; i < n; ++i) {
    const int j = rng.uniform_int(0, i - 1);
    add_link(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  std::vector<std::pair<int, int>> candidates;
  candidates.reserve(static_cast<std::size_t>(max_links - (n - 1)));
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (!used.count({a, b})) candidates.push_back({a, b});
    }
  }
  rng.shuffle(candidates);
  for (long i = 0; i < m - (n - 1); ++i) {
    add_link(candidates[static_cast<std::size_t>(i)].first,
             candidates[static_cast<std::size_t>(i)].second);
  }
  std::sort(topo.links.begin(), topo.links.end());

  topo.link_capacity.reserve(topo.links.size());
  for (std::size_t i = 0; i < topo.links.size(); ++i) {
    const int pick = rng.uniform_int(0, static_cast<int>(capacity_levels.size()) - 1);
    topo.link_capacity.push_back(capacity_levels[static_cast<std::size_t>(pick)]);
  }
  return topo;
}

RoutingMatrix generate_routing(const NetworkTopology& topology) {
  const int n = topology.n;
  if (!is_connected(n, topology.links)) {
    throw ValidationError("generate_routing: topology is not connected");
  }
  const auto adj = topology.adjacency();

  RoutingMatrix routing;
  routing.next_hop = Eigen::MatrixXi::Constant(n, n, -1);

  // BFS from each destination gives hop counts; next hop = smallest-id neighbor
  // minimizing distance to the destination.
  std::vector<int> dist(static_cast<std::size_t>(n));
  for (int d = 0; d < n; ++d) {
    std::fill(dist.begin(), dist.end(), -1);
    std::deque<int> queue{d};
    dist[static_cast<std::size_t>(d)] = 0;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int v : adj[static_cast<std::size_t>(u)]) {
        if (dist[static_cast<std::size_t>(v)] < 0) {
          dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
          queue.push_back(v);
        }
      }
    }
    for (int c = 0; c < n; ++c) {
      if (c == d) continue;
      int best = -1;
      int best_dist = -1;
      for (int y : adj[static_cast<std::size_t>(c)]) {  // ascending id: first min wins
        const int dy = dist[static_cast<std::size_t>(y)];
        if (best < 0 || dy < best_dist) {
          best = y;
          best_dist = dy;
        }
      }
      routing.next_hop(c, d) = best;
    }
  }
  return routing;
}

std::vector<DirectedLink> walk_route(const NetworkTopology& topology, const RoutingMatrix& routing,
                                     int src, int dst) {
  std::vector<DirectedLink> hops;
  std::vector<char> visited(static_cast<std::size_t>(topology.n), 0);
  int cur = src;
  visited[static_cast<std::size_t>(cur)] = 1;
  while (cur != dst) {
    const int next = routing.next_hop(cur, dst);
    if (next < 0 || next >= topology.n || visited[static_cast<std::size_t>(next)]) {
      throw RoutingLoopError("routing loop walking " + std::to_string(src) + "->" +
                             std::to_string(dst) + " at node " + std::to_string(cur));
    }
    hops.push_back({cur, next});
    visited[static_cast<std::size_t>(next)] = 1;
    cur = next;
  }
  return hops;
}

std::vector<DirectedLink> trajectory(const NetworkSnapshot& snapshot, int pair_index) {
  if (pair_index < 0 || pair_index >= static_cast<int>(snapshot.traffic.pairs.size())) {
    throw ValidationError("trajectory: pair index " + std::to_string(pair_index) +
                          " out of range");
  }
  const auto& p = snapshot.traffic.pairs[static_cast<std::size_t>(pair_index)];
  return walk_route(snapshot.topology, snapshot.routing, p.src, p.dst);
}

TrafficMatrix generate_traffic(const NetworkTopology& topology, const RoutingMatrix& routing,
                               int k, double max_utilization, std::uint64_t seed) {
  if (!(max_utilization > 0.0 && max_utilization < 1.0)) {
    throw ValidationError("generate_traffic: max_utilization must be in (0, 1)");
  }
  if (k < 1) throw ValidationError("generate_traffic: k must be >= 1");
  const int n = topology.n;
  if (n < 2) throw ValidationError("generate_traffic: cannot place OD pairs on < 2 nodes");

  Rng rng(seed);
  TrafficMatrix traffic;

  // distinct ordered pairs first; duplicates only once they are exhausted
  std::vector<std::pair<int, int>> all;
  all.reserve(static_cast<std::size_t>(n) * (n - 1));
  for (int s = 0; s < n; ++s) {
    for (int d = 0; d < n; ++d) {
      if (s != d) all.push_back({s, d});
    }
  }
  rng.shuffle(all);
  for (int i = 0; i < k; ++i) {
    std::pair<int, int> sd;
    if (i < static_cast<int>(all.size())) {
      sd = all[static_cast<std::size_t>(i)];
    } else {
      sd.first = rng.uniform_int(0, n - 1);
      do {
        sd.second = rng.uniform_int(0, n - 1);
      } while (sd.second == sd.first);
    }
    OdDemand dem;
    dem.src = sd.first;
    dem.dst = sd.second;
    dem.mean_rate = rng.uniform(1.0, 10.0);
    dem.peak_rate = 0.0;  // set after rescale
    traffic.pairs.push_back(dem);
  }

  // rescale all demands so the most loaded link sits at a drawn target utilization
  std::map<DirectedLink, double> load;
  for (const auto& dem : traffic.pairs) {
    for (const auto& hop : walk_route(topology, routing, dem.src, dem.dst)) {
      load[hop] += dem.mean_rate;
    }
  }
  double max_rho = 0.0;
  for (const auto& [link, traffic_sum] : load) {
    max_rho = std::max(max_rho, traffic_sum / topology.capacity(link.u, link.v));
  }
  const double target = rng.uniform(0.3 * max_utilization, max_utilization);
  const double scale = target / max_rho;
  for (auto& dem : traffic.pairs) {
    dem.mean_rate *= scale;
    dem.peak_rate = dem.mean_rate * rng.uniform(1.0, 3.0);
  }
  return traffic;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

json snapshot_to_json(const NetworkSnapshot& s) {
  json topo;
  topo["n"] = s.topology.n;
  json links = json::array();
  for (std::size_t i = 0; i < s.topology.links.size(); ++i) {
    links.push_back({s.topology.links[i][0], s.topology.links[i][1], s.topology.link_capacity[i]});
  }
  topo["links"] = std::move(links);
  if (!s.topology.node_attrs.empty()) topo["node_attrs"] = s.topology.node_attrs;

  json traffic = json::array();
  for (const auto& p : s.traffic.pairs) {
    traffic.push_back({p.src, p.dst, p.mean_rate, p.peak_rate});
  }

  json routing = json::array();
  for (int r = 0; r < s.routing.next_hop.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < s.routing.next_hop.cols(); ++c) row.push_back(s.routing.next_hop(r, c));
    routing.push_back(std::move(row));
  }

  json out;
  out["topology"] = std::move(topo);
  out["traffic"] = std::move(traffic);
  out["routing"] = std::move(routing);
  if (s.performance) {
    json perf;
    perf["path_latency"] = s.performance->path_latency;
    json occ = json::array();
    for (const auto& [link, value] : s.performance->link_occupancy) {
      occ.push_back({std::to_string(link.u) + "->" + std::to_string(link.v), value});
    }
    perf["link_occupancy"] = std::move(occ);
    out["performance"] = std::move(perf);
  }
  return out;
}

NetworkSnapshot snapshot_from_json(const json& j) {
  NetworkSnapshot s;
  try {
    const auto& topo = j.at("topology");
    s.topology.n = topo.at("n").get<int>();
    for (const auto& l : topo.at("links")) {
      s.topology.links.push_back({l.at(0).get<int>(), l.at(1).get<int>()});
      s.topology.link_capacity.push_back(l.at(2).get<double>());
    }
    if (topo.contains("node_attrs")) {
      s.topology.node_attrs = topo.at("node_attrs").get<std::vector<std::vector<double>>>();
    }
    for (const auto& t : j.at("traffic")) {
      OdDemand d;
      d.src = t.at(0).get<int>();
      d.dst = t.at(1).get<int>();
      d.mean_rate = t.at(2).get<double>();
      d.peak_rate = t.at(3).get<double>();
      s.traffic.pairs.push_back(d);
    }
    const auto& routing = j.at("routing");
    const int n = s.topology.n;
    if (static_cast<int>(routing.size()) != n) {
      throw ValidationError("routing matrix must be n x n");
    }
    s.routing.next_hop.resize(n, n);
    for (int r = 0; r < n; ++r) {
      const auto& row = routing.at(static_cast<std::size_t>(r));
      if (static_cast<int>(row.size()) != n) throw ValidationError("routing matrix must be n x n");
      for (int c = 0; c < n; ++c) s.routing.next_hop(r, c) = row.at(static_cast<std::size_t>(c)).get<int>();
    }
    if (j.contains("performance")) {
      PerformanceMatrix perf;
      const auto& pj = j.at("performance");
      perf.path_latency = pj.at("path_latency").get<std::vector<double>>();
      for (const auto& e : pj.at("link_occupancy")) {
        const std::string key = e.at(0).get<std::string>();
        const auto arrow = key.find("->");
        if (arrow == std::string::npos) throw ValidationError("malformed link key '" + key + "'");
        DirectedLink link{std::stoi(key.substr(0, arrow)), std::stoi(key.substr(arrow + 2))};
        perf.link_occupancy[link] = e.at(1).get<double>();
      }
      s.performance = std::move(perf);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("snapshot JSON: ") + e.what());
  }
  return s;
}

}  // namespace

void validate(const NetworkSnapshot& s) {
  const auto& topo = s.topology;
  if (topo.n < 1) throw ValidationError("topology must have at least one node");
  std::set<std::pair<int, int>> seen;
  for (std::size_t i = 0; i < topo.links.size(); ++i) {
    const int u = topo.links[i][0];
    const int v = topo.links[i][1];
    if (u < 0 || u >= topo.n || v < 0 || v >= topo.n) {
      throw ValidationError("link node id out of range at links[" + std::to_string(i) + "]");
    }
    if (u == v) throw ValidationError("self-loop link at links[" + std::to_string(i) + "]");
    auto key = std::minmax(u, v);
    if (!seen.insert({key.first, key.second}).second) {
      throw ValidationError("duplicate link at links[" + std::to_string(i) + "]");
    }
    if (!(topo.link_capacity[i] > 0.0)) {
      throw ValidationError("link capacity > 0 violated at links[" + std::to_string(i) + "]");
    }
  }
  if (!is_connected(topo.n, topo.links)) throw ValidationError("graph is not connected");
  if (!topo.node_attrs.empty() && static_cast<int>(topo.node_attrs.size()) != topo.n) {
    throw ValidationError("node_attrs must have one entry per node when present");
  }

  for (std::size_t i = 0; i < s.traffic.pairs.size(); ++i) {
    const auto& p = s.traffic.pairs[i];
    if (p.src < 0 || p.src >= topo.n || p.dst < 0 || p.dst >= topo.n) {
      throw ValidationError("traffic pair node id out of range at traffic[" + std::to_string(i) + "]");
    }
    if (p.src == p.dst) {
      throw ValidationError("source equals destination at traffic[" + std::to_string(i) + "]");
    }
    if (!(p.mean_rate > 0.0)) {
      throw ValidationError("mean throughput > 0 violated at traffic[" + std::to_string(i) + "]");
    }
    if (!(p.peak_rate >= p.mean_rate)) {
      throw ValidationError("peak throughput >= mean violated at traffic[" + std::to_string(i) + "]");
    }
  }

  if (s.routing.next_hop.rows() != topo.n || s.routing.next_hop.cols() != topo.n) {
    throw ValidationError("routing matrix must be n x n");
  }
  const auto adj = topo.adjacency();
  for (int c = 0; c < topo.n; ++c) {
    for (int d = 0; d < topo.n; ++d) {
      const int h = s.routing.next_hop(c, d);
      if (c == d) {
        if (h != -1) throw ValidationError("routing diagonal must be -1");
        continue;
      }
      if (h < 0 || h >= topo.n) {
        throw ValidationError("next_hop(" + std::to_string(c) + "," + std::to_string(d) +
                              ") out of range");
      }
      const auto& nbrs = adj[static_cast<std::size_t>(c)];
      if (!std::binary_search(nbrs.begin(), nbrs.end(), h)) {
        throw ValidationError("next_hop(" + std::to_string(c) + "," + std::to_string(d) +
                              ") is not a neighbor");
      }
    }
  }
  // loop-freeness: every walk must terminate
  for (int c = 0; c < topo.n; ++c) {
    for (int d = 0; d < topo.n; ++d) {
      if (c != d) walk_route(topo, s.routing, c, d);
    }
  }

  if (s.performance) {
    const auto& perf = *s.performance;
    if (perf.path_latency.size() != s.traffic.pairs.size()) {
      throw ValidationError("every OD pair needs a path_latency entry");
    }
    for (std::size_t i = 0; i < perf.path_latency.size(); ++i) {
      if (!(perf.path_latency[i] > 0.0)) {
        throw ValidationError("latency > 0 violated at path_latency[" + std::to_string(i) + "]");
      }
    }
    for (const auto& [link, occ] : perf.link_occupancy) {
      if (topo.link_index(link.u, link.v) < 0) {
        throw ValidationError("occupancy for nonexistent link " + std::to_string(link.u) + "->" +
                              std::to_string(link.v));
      }
      if (!(occ >= 0.0)) throw ValidationError("occupancy >= 0 violated");
    }
  }
}

NetworkSnapshot load_snapshot(const std::string& bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("snapshot JSON: ") + e.what());
  }
  NetworkSnapshot s = snapshot_from_json(j);
  validate(s);
  return s;
}

std::string save_snapshot(const NetworkSnapshot& snapshot) {
  return snapshot_to_json(snapshot).dump();
}

std::vector<NetworkSnapshot> load_dataset(std::istream& in) {
  std::vector<NetworkSnapshot> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(load_snapshot(line));
    } catch (const Error& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<NetworkSnapshot> load_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file: " + path);
  return load_dataset(in);
}

void save_dataset(const std::vector<NetworkSnapshot>& snapshots, std::ostream& out) {
  for (const auto& s : snapshots) out << save_snapshot(s) << '\n';
}

void save_dataset_file(const std::vector<NetworkSnapshot>& snapshots, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open output file: " + path);
  save_dataset(snapshots, out);
}

}  // namespace netlat

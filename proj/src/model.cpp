#include "netlat/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "netlat/rng.hpp"

namespace netlat::model {

using tensor::Matrix;
using tensor::Sparse;
using tensor::Tape;
using tensor::Var;

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j;
  j["embed_dim"] = embed_dim;
  j["dgcn_layers"] = dgcn_layers;
  j["gat_heads"] = gat_heads;
  j["gat_dim"] = gat_dim;
  j["n_roles"] = n_roles;
  j["edgedrop_p"] = edgedrop_p;
  j["readout"] = readout;
  j["leaky_slope"] = leaky_slope;
  j["branch_wiring"] = branch_wiring;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.dgcn_layers = j.value("dgcn_layers", c.dgcn_layers);
  c.gat_heads = j.value("gat_heads", c.gat_heads);
  c.gat_dim = j.value("gat_dim", c.gat_dim);
  c.n_roles = j.value("n_roles", c.n_roles);
  c.edgedrop_p = j.value("edgedrop_p", c.edgedrop_p);
  c.readout = j.value("readout", c.readout);
  c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
  c.branch_wiring = j.value("branch_wiring", c.branch_wiring);
  c.validate();
  return c;
}

void ModelConfig::validate() const {
  if (embed_dim < 1 || dgcn_layers < 1 || gat_heads < 1 || n_roles < 1) {
    throw ValidationError("model config: dimensions must be >= 1");
  }
  if (!(edgedrop_p >= 0.0 && edgedrop_p < 1.0)) {
    throw ValidationError("model config: edgedrop_p must be in [0, 1)");
  }
  if (readout != "nalu" && readout != "mlp") {
    throw ValidationError("model config: readout must be 'nalu' or 'mlp'");
  }
  if (branch_wiring != "parallel" && branch_wiring != "sequential") {
    throw ValidationError("model config: branch_wiring must be 'parallel' or 'sequential'");
  }
}

// ---------------------------------------------------------------------------
// adjacencies

namespace {

Sparse normalized(const Sparse& a_tilde) {
  const int n = static_cast<int>(a_tilde.rows());
  Eigen::VectorXd deg = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < a_tilde.outerSize(); ++k) {
    for (Sparse::InnerIterator it(a_tilde, k); it; ++it) deg(it.row()) += it.value();
  }
  Eigen::VectorXd dinv_sqrt = deg.array().rsqrt();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(a_tilde.nonZeros()));
  for (int k = 0; k < a_tilde.outerSize(); ++k) {
    for (Sparse::InnerIterator it(a_tilde, k); it; ++it) {
      triplets.emplace_back(it.row(), it.col(),
                            dinv_sqrt(it.row()) * it.value() * dinv_sqrt(it.col()));
    }
  }
  Sparse out(n, n);
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

Sparse with_self_loops(Sparse a) {
  Sparse eye(a.rows(), a.cols());
  eye.setIdentity();
  a = a + eye;
  a.prune(0.0, 0.0);
  return a;
}

Sparse symmetrize(const Sparse& m) {
  Sparse mt = m.transpose();
  Sparse out = (m + mt) * 0.5;
  out.prune(0.0, 0.0);
  return out;
}

}  // namespace

DgcnAdjacencies build_adjacencies(const linegraph::LineGraph& lg) {
  const int n = static_cast<int>(lg.lnodes.size());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(lg.ledges.size());
  for (const auto& e : lg.ledges) triplets.emplace_back(e.src, e.dst, e.weight);
  Sparse a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());

  // first-order: (A + A^T) / 2
  Sparse a_first = symmetrize(a);

  // second-order in: sum_k A(k,i) A(k,j) / rowsum(k); rows summing to zero drop out
  Eigen::VectorXd row_sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd col_sum = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < a.outerSize(); ++k) {
    for (Sparse::InnerIterator it(a, k); it; ++it) {
      row_sum(it.row()) += it.value();
      col_sum(it.col()) += it.value();
    }
  }
  std::vector<Eigen::Triplet<double>> row_scaled, col_scaled;
  for (int k = 0; k < a.outerSize(); ++k) {
    for (Sparse::InnerIterator it(a, k); it; ++it) {
      if (row_sum(it.row()) > 0.0) {
        row_scaled.emplace_back(it.row(), it.col(), it.value() / row_sum(it.row()));
      }
      if (col_sum(it.col()) > 0.0) {
        col_scaled.emplace_back(it.row(), it.col(), it.value() / col_sum(it.col()));
      }
    }
  }
  Sparse a_row_scaled(n, n), a_col_scaled(n, n);
  a_row_scaled.setFromTriplets(row_scaled.begin(), row_scaled.end());
  a_col_scaled.setFromTriplets(col_scaled.begin(), col_scaled.end());

  Sparse at = a.transpose();
  Sparse sec_in = symmetrize(at * a_row_scaled);    // A^T diag(rowsum)^-1 A
  Sparse sec_out = symmetrize(a_col_scaled * at);   // A diag(colsum)^-1 A^T

  DgcnAdjacencies adjs;
  adjs.a_first = with_self_loops(std::move(a_first));
  adjs.a_sec_in = with_self_loops(std::move(sec_in));
  adjs.a_sec_out = with_self_loops(std::move(sec_out));
  adjs.n_first = normalized(adjs.a_first);
  adjs.n_sec_in = normalized(adjs.a_sec_in);
  adjs.n_sec_out = normalized(adjs.a_sec_out);
  return adjs;
}

namespace {

Sparse drop_edges(const Sparse& a_tilde, double p, Rng& rng) {
  const int n = static_cast<int>(a_tilde.rows());
  std::set<std::pair<int, int>> dropped;
  // decide once per upper-triangle entry; the mirrored entry follows
  for (int k = 0; k < a_tilde.outerSize(); ++k) {
    for (Sparse::InnerIterator it(a_tilde, k); it; ++it) {
      if (it.row() < it.col() && rng.uniform() < p) {
        dropped.insert({static_cast<int>(it.row()), static_cast<int>(it.col())});
      }
    }
  }
  std::vector<Eigen::Triplet<double>> kept;
  kept.reserve(static_cast<std::size_t>(a_tilde.nonZeros()));
  for (int k = 0; k < a_tilde.outerSize(); ++k) {
    for (Sparse::InnerIterator it(a_tilde, k); it; ++it) {
      const int lo = static_cast<int>(std::min(it.row(), it.col()));
      const int hi = static_cast<int>(std::max(it.row(), it.col()));
      if (it.row() != it.col() && dropped.count({lo, hi})) continue;
      kept.emplace_back(it.row(), it.col(), it.value());
    }
  }
  Sparse out(n, n);
  out.setFromTriplets(kept.begin(), kept.end());
  return out;
}

}  // namespace

DgcnAdjacencies edge_drop(const DgcnAdjacencies& adjs, double p, std::uint64_t seed,
                          bool training) {
  if (!(p >= 0.0 && p < 1.0)) throw ValidationError("edge_drop: p must be in [0, 1)");
  if (!training || p == 0.0) return adjs;
  Rng base(seed);
  DgcnAdjacencies out;
  Rng r0 = base.fork(0);
  Rng r1 = base.fork(1);
  Rng r2 = base.fork(2);
  out.a_first = drop_edges(adjs.a_first, p, r0);
  out.a_sec_in = drop_edges(adjs.a_sec_in, p, r1);
  out.a_sec_out = drop_edges(adjs.a_sec_out, p, r2);
  out.n_first = normalized(out.a_first);
  out.n_sec_in = normalized(out.a_sec_in);
  out.n_sec_out = normalized(out.a_sec_out);
  return out;
}

// ---------------------------------------------------------------------------
// transform

TransformedSnapshot transform(const NetworkSnapshot& snapshot, int n_roles,
                              std::uint64_t role_seed) {
  TransformedSnapshot ts;
  ts.lg = linegraph::build_line_graph(snapshot);
  const Eigen::MatrixXd features = roles::structural_features(ts.lg);
  ts.roles = roles::assign_roles(features, n_roles, role_seed);
  ts.role_adj = roles::build_role_adjacency(ts.lg, ts.roles);
  ts.adjs = build_adjacencies(ts.lg);
  ts.n_nodes = snapshot.topology.n;
  ts.n_pairs = static_cast<int>(snapshot.traffic.pairs.size());

  for (int p = 0; p < ts.n_pairs; ++p) {
    for (int idx : ts.lg.trajectories[static_cast<std::size_t>(p)]) {
      ts.flat_traj.push_back(idx);
      ts.flat_seg.push_back(p);
    }
  }

  // role attention edges: self-loop per lnode plus both directions of each pair
  const int count = static_cast<int>(ts.lg.lnodes.size());
  std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(count));
  for (const auto& [s, d] : ts.role_adj.pairs) {
    nbrs[static_cast<std::size_t>(s)].push_back(d);
    nbrs[static_cast<std::size_t>(d)].push_back(s);
  }
  for (int i = 0; i < count; ++i) {
    ts.gat_center.push_back(i);
    ts.gat_nbr.push_back(i);
    for (int j : nbrs[static_cast<std::size_t>(i)]) {
      ts.gat_center.push_back(i);
      ts.gat_nbr.push_back(j);
    }
  }

  if (snapshot.performance) {
    ts.truth_path = snapshot.performance->path_latency;
    ts.truth_occ.assign(static_cast<std::size_t>(count),
                        std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < count; ++i) {
      auto it = snapshot.performance->link_occupancy.find(ts.lg.lnodes[static_cast<std::size_t>(i)]);
      if (it != snapshot.performance->link_occupancy.end()) {
        ts.truth_occ[static_cast<std::size_t>(i)] = it->second;
      }
    }
  }
  return ts;
}

// ---------------------------------------------------------------------------
// layers

Var nalu_cell(Tape& t, Var x, tensor::ParamStore& store, const std::string& prefix) {
  Var w_hat = t.param(store, prefix + ".W_hat");
  Var m_hat = t.param(store, prefix + ".M_hat");
  Var gate_w = t.param(store, prefix + ".G");
  Var w = tensor::cmul(tensor::tanh_op(w_hat), tensor::sigmoid(m_hat));
  Var additive = tensor::matmul(x, w);
  Var multiplicative = tensor::exp_op(tensor::matmul(tensor::log_guarded(x), w));
  Var gate = tensor::sigmoid(tensor::matmul(x, gate_w));
  Var ones = t.constant(Matrix::Ones(gate.rows(), gate.cols()));
  return tensor::add(tensor::cmul(gate, additive),
                     tensor::cmul(tensor::sub(ones, gate), multiplicative));
}

Var mlp_cell(Tape& t, Var x, tensor::ParamStore& store, const std::string& prefix) {
  Var w1 = t.param(store, prefix + ".W1");
  Var b1 = t.param(store, prefix + ".b1");
  Var w2 = t.param(store, prefix + ".W2");
  Var b2 = t.param(store, prefix + ".b2");
  Var hidden = tensor::tanh_op(tensor::add_rowvec(tensor::matmul(x, w1), b1));
  return tensor::add_rowvec(tensor::matmul(hidden, w2), b2);
}

Var dgcn_block(Tape& t, Var h, const DgcnAdjacencies& adjs, tensor::ParamStore& store,
               const std::string& prefix, Var alpha, Var beta, double leaky_slope) {
  Var theta_f = t.param(store, prefix + ".theta_f");
  Var theta_in = t.param(store, prefix + ".theta_in");
  Var theta_out = t.param(store, prefix + ".theta_out");
  Var skip = t.param(store, prefix + ".skip");

  Var f_first = tensor::matmul(tensor::spmm(adjs.n_first, h), theta_f);
  Var f_in = tensor::matmul(tensor::spmm(adjs.n_sec_in, h), theta_in);
  Var f_out = tensor::matmul(tensor::spmm(adjs.n_sec_out, h), theta_out);
  Var pre = tensor::concat_cols(
      {f_first, tensor::scale_by(f_in, alpha), tensor::scale_by(f_out, beta)});
  return tensor::leaky_relu(tensor::add(pre, tensor::matmul(h, skip)), leaky_slope);
}

Var gat_layer(Tape& t, Var h, const std::vector<int>& centers, const std::vector<int>& neighbors,
              tensor::ParamStore& store, const std::string& prefix, int heads,
              double leaky_slope) {
  const int n = static_cast<int>(h.rows());
  std::vector<Var> head_outputs;
  head_outputs.reserve(static_cast<std::size_t>(heads));
  for (int hd = 0; hd < heads; ++hd) {
    const std::string p = prefix + ".h" + std::to_string(hd);
    Var w = t.param(store, p + ".W");
    Var a_center = t.param(store, p + ".a_center");
    Var a_neighbor = t.param(store, p + ".a_neighbor");
    Var hw = tensor::matmul(h, w);
    Var center_score = tensor::matmul(hw, a_center);
    Var neighbor_score = tensor::matmul(hw, a_neighbor);
    Var logits = tensor::leaky_relu(
        tensor::add(tensor::rows(center_score, centers), tensor::rows(neighbor_score, neighbors)),
        leaky_slope);
    Var attention = tensor::segment_softmax(logits, centers, n);
    Var messages = tensor::scale_rows(tensor::rows(hw, neighbors), attention);
    head_outputs.push_back(tensor::segment_sum(messages, centers, n));
  }
  return heads == 1 ? head_outputs[0] : tensor::concat_cols(head_outputs);
}

// ---------------------------------------------------------------------------
// full forward pass

namespace {

Var cell(Tape& t, Var x, tensor::ParamStore& store, const std::string& prefix,
         const ModelConfig& config) {
  return config.readout == "nalu" ? nalu_cell(t, x, store, prefix)
                                  : mlp_cell(t, x, store, prefix);
}

}  // namespace

ForwardResult forward(Tape& t, const TransformedSnapshot& ts, const ModelConfig& config,
                      tensor::ParamStore& store, bool training, std::uint64_t drop_seed) {
  config.validate();
  Var x = t.constant(ts.lg.node_features);
  Var h = cell(t, x, store, "embed", config);

  const DgcnAdjacencies* adjs = &ts.adjs;
  DgcnAdjacencies dropped;
  if (training && config.edgedrop_p > 0.0) {
    dropped = edge_drop(ts.adjs, config.edgedrop_p, drop_seed, true);
    adjs = &dropped;
  }

  Var alpha = t.param(store, "alpha");
  Var beta = t.param(store, "beta");
  Var deep = h;
  for (int l = 0; l < config.dgcn_layers; ++l) {
    deep = dgcn_block(t, deep, *adjs, store, "dgcn" + std::to_string(l), alpha, beta,
                      config.leaky_slope);
  }

  Var z;
  if (config.branch_wiring == "parallel") {
    Var attention = gat_layer(t, h, ts.gat_center, ts.gat_nbr, store, "gat", config.gat_heads,
                              config.leaky_slope);
    z = tensor::concat_cols({deep, attention});
  } else {
    z = gat_layer(t, deep, ts.gat_center, ts.gat_nbr, store, "gat", config.gat_heads,
                  config.leaky_slope);
  }

  Var hidden = cell(t, z, store, "readout1", config);
  Var out = cell(t, hidden, store, "readout2", config);

  ForwardResult result;
  result.delay = tensor::softplus(tensor::cols(out, 0, 1));
  result.occupancy = tensor::cols(out, 1, 1);
  return result;
}

Var predict_path_latency(Var delay, const TransformedSnapshot& ts) {
  Var hops = tensor::rows(delay, ts.flat_traj);
  return tensor::segment_sum(hops, ts.flat_seg, ts.n_pairs);
}

// ---------------------------------------------------------------------------
// parameter initialization

namespace {

Matrix xavier(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-limit, limit);
  }
  return m;
}

void init_cell(tensor::ParamStore& store, const std::string& prefix, int in_dim, int out_dim,
               const ModelConfig& config, Rng& rng) {
  if (config.readout == "nalu") {
    // tanh(W_hat) must start near zero or the exp-log path blows up on wide inputs
    store.add(prefix + ".W_hat", xavier(in_dim, out_dim, rng));
    store.add(prefix + ".M_hat", xavier(in_dim, out_dim, rng));
    store.add(prefix + ".G", xavier(in_dim, out_dim, rng));
  } else {
    const int hidden = std::max(out_dim, 16);
    store.add(prefix + ".W1", xavier(in_dim, hidden, rng));
    store.add(prefix + ".b1", Matrix::Zero(1, hidden));
    store.add(prefix + ".W2", xavier(hidden, out_dim, rng));
    store.add(prefix + ".b2", Matrix::Zero(1, out_dim));
  }
}

}  // namespace

tensor::ParamStore init_params(const ModelConfig& config, int in_features, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  tensor::ParamStore store;

  init_cell(store, "embed", in_features, config.embed_dim, config, rng);

  store.add("alpha", Matrix::Ones(1, 1));
  store.add("beta", Matrix::Ones(1, 1));
  const int branch = config.branch_dim();
  int d_in = config.embed_dim;
  for (int l = 0; l < config.dgcn_layers; ++l) {
    const std::string prefix = "dgcn" + std::to_string(l);
    store.add(prefix + ".theta_f", xavier(d_in, branch, rng));
    store.add(prefix + ".theta_in", xavier(d_in, branch, rng));
    store.add(prefix + ".theta_out", xavier(d_in, branch, rng));
    store.add(prefix + ".skip", xavier(d_in, config.block_dim(), rng));
    d_in = config.block_dim();
  }

  const int gat_dim = config.gat_dim > 0 ? config.gat_dim : config.embed_dim / config.gat_heads;
  const int gat_in = config.branch_wiring == "parallel" ? config.embed_dim : config.block_dim();
  for (int hd = 0; hd < config.gat_heads; ++hd) {
    const std::string prefix = "gat.h" + std::to_string(hd);
    store.add(prefix + ".W", xavier(gat_in, gat_dim, rng));
    store.add(prefix + ".a_center", xavier(gat_dim, 1, rng));
    store.add(prefix + ".a_neighbor", xavier(gat_dim, 1, rng));
  }

  const int merged = config.branch_wiring == "parallel"
                         ? config.block_dim() + config.gat_out_dim()
                         : config.gat_out_dim();
  init_cell(store, "readout1", merged, config.embed_dim, config, rng);
  init_cell(store, "readout2", config.embed_dim, 2, config, rng);
  return store;
}

}  // namespace netlat::model

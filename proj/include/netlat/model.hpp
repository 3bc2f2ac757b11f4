#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netlat/linegraph.hpp"
#include "netlat/roles.hpp"
#include "netlat/tensor.hpp"

namespace netlat::model {

inline constexpr std::uint64_t kDefaultRoleSeed = 0xA11CE5EEDULL;

struct ModelConfig {
  int embed_dim = 32;
  int dgcn_layers = 3;
  int gat_heads = 2;
  int gat_dim = 0;  // 0 -> embed_dim / gat_heads
  int n_roles = 5;
  double edgedrop_p = 0.1;
  std::string readout = "nalu";  // "nalu" | "mlp" (ablation)
  double leaky_slope = 0.2;
  std::string branch_wiring = "parallel";  // "parallel" | "sequential"

  int branch_dim() const { return (embed_dim + 2) / 3; }   // per-DGCN-branch width
  int block_dim() const { return 3 * branch_dim(); }        // DGCN block output width
  int gat_out_dim() const { return gat_heads * (gat_dim > 0 ? gat_dim : embed_dim / gat_heads); }

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  void validate() const;
};

// The three proximity matrices of the directed convolution, with self-loops,
// plus their cached symmetric normalizations.
struct DgcnAdjacencies {
  tensor::Sparse a_first, a_sec_in, a_sec_out;  // A_x + I
  tensor::Sparse n_first, n_sec_in, n_sec_out;  // D^{-1/2} (A_x + I) D^{-1/2}
};

DgcnAdjacencies build_adjacencies(const linegraph::LineGraph& lg);

// training mode: every off-diagonal symmetric entry pair of each matrix is
// dropped independently with probability p and normalizations are rebuilt;
// inference mode returns the input unchanged
DgcnAdjacencies edge_drop(const DgcnAdjacencies& adjs, double p, std::uint64_t seed, bool training);

// everything derived from one snapshot that the model consumes; built once,
// reused across epochs
struct TransformedSnapshot {
  linegraph::LineGraph lg;
  roles::RoleAssignment roles;
  roles::RoleAdjacency role_adj;
  DgcnAdjacencies adjs;
  std::vector<int> flat_traj;  // lnode index per (pair, hop), trajectory order
  std::vector<int> flat_seg;   // pair index per (pair, hop)
  std::vector<int> gat_center;  // role-attention edges, self-loops included
  std::vector<int> gat_nbr;
  int n_nodes = 0;
  int n_pairs = 0;
  std::vector<double> truth_path;  // seconds; empty when performance absent
  std::vector<double> truth_occ;   // per lnode; NaN where no ground truth
};

TransformedSnapshot transform(const NetworkSnapshot& snapshot, int n_roles,
                              std::uint64_t role_seed = kDefaultRoleSeed);

// layers
tensor::Var nalu_cell(tensor::Tape& t, tensor::Var x, tensor::ParamStore& store,
                      const std::string& prefix);
tensor::Var mlp_cell(tensor::Tape& t, tensor::Var x, tensor::ParamStore& store,
                     const std::string& prefix);
tensor::Var dgcn_block(tensor::Tape& t, tensor::Var h, const DgcnAdjacencies& adjs,
                       tensor::ParamStore& store, const std::string& prefix, tensor::Var alpha,
                       tensor::Var beta, double leaky_slope);
tensor::Var gat_layer(tensor::Tape& t, tensor::Var h, const std::vector<int>& centers,
                      const std::vector<int>& neighbors, tensor::ParamStore& store,
                      const std::string& prefix, int heads, double leaky_slope);

struct ForwardResult {
  tensor::Var delay;      // L x 1, softplus-positive, seconds
  tensor::Var occupancy;  // L x 1
};

ForwardResult forward(tensor::Tape& t, const TransformedSnapshot& ts, const ModelConfig& config,
                      tensor::ParamStore& store, bool training, std::uint64_t drop_seed = 0);

// per-OD-pair latency: sum of the predicted delays along each trajectory
tensor::Var predict_path_latency(tensor::Var delay, const TransformedSnapshot& ts);

tensor::ParamStore init_params(const ModelConfig& config, int in_features, std::uint64_t seed);

}  // namespace netlat::model

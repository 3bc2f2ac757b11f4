#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netlat/model.hpp"
#include "netlat/netmodel.hpp"
#include "netlat/tensor.hpp"

namespace netlat::trainer {

using Dataset = std::vector<NetworkSnapshot>;

struct TrainConfig {
  double lr = 1e-3;
  int epochs = 30;              // desk default; paper-scale 250
  int samples_per_epoch = 400;  // desk default; paper-scale 4000
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  double lambda_path = 1.0;
  double lambda_link = 0.5;
  int patience = 8;
  double grad_clip = 1.0;  // global gradient norm cap; <= 0 disables
  int jobs = 0;            // parallel seeds; 0 = hardware concurrency

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  void validate() const;
};

// 100 * mean(|pred - truth| / |truth|); throws naming the index of a zero truth entry
double mape(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth);

// weighted differentiable objective: path MAPE plus occupancy MAPE over links
// with positive ground-truth occupancy
tensor::Var loss_op(tensor::Tape& t, const model::ForwardResult& fwd, tensor::Var path_pred,
                    const model::TransformedSnapshot& ts, double lambda_path, double lambda_link);

struct BucketStat {
  int lo = 0;
  int hi = 0;
  double mape_mean = 0.0;
  double mape_std = 0.0;
  double infer_ms_mean = 0.0;
  int count = 0;
};

struct EvalResult {
  std::vector<BucketStat> buckets;   // only non-empty buckets are listed
  double overall_mape = 0.0;         // mean of per-snapshot MAPE
  double overall_infer_ms = 0.0;
  std::vector<double> per_snapshot_mape;
  std::vector<int> per_snapshot_nodes;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool diverged = false;
  int epochs_run = 0;
  int best_epoch = -1;
  std::vector<double> train_mape;  // per epoch
  std::vector<double> val_mape;    // per epoch
  tensor::ParamStore best_params;
  EvalResult test;  // filled when a test set is provided
};

struct TrainReport {
  nlohmann::json model_config;
  nlohmann::json train_config;
  std::vector<SeedOutcome> seeds;
  std::string config_label = "default";

  nlohmann::json to_json() const;
  // columns: config, seed, bucket_lo, bucket_hi, mape_mean, mape_std, infer_ms_mean
  std::string to_csv() const;
};

std::vector<model::TransformedSnapshot> transform_dataset(const Dataset& data, int n_roles,
                                                          int jobs = 0);

TrainReport train(const Dataset& train_set, const Dataset& val_set, const Dataset& test_set,
                  const model::ModelConfig& mcfg, const TrainConfig& tcfg);

// bucket_edges {50, 75, 100} makes buckets [50,75) and [75,100]; inference time
// is wall clock around forward + path-sum only, single-threaded
EvalResult evaluate(const tensor::ParamStore& params, const model::ModelConfig& mcfg,
                    const std::vector<model::TransformedSnapshot>& test,
                    const std::vector<int>& bucket_edges);

// NALU vs MLP readout comparison on the same data and seeds
struct AblationReport {
  std::vector<TrainReport> runs;
  nlohmann::json table;  // per config x bucket: across-seed mean and variance
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

AblationReport ablate(const Dataset& train_set, const Dataset& val_set, const Dataset& test_set,
                      const model::ModelConfig& base, const TrainConfig& tcfg);

// train = sizes <= max_train_n; the rest split val_fraction/remainder by seeded shuffle
struct SplitDataset {
  Dataset train, val, test;
};
SplitDataset split_by_size(const Dataset& all, int max_train_n = 50, double val_fraction = 0.1,
                           std::uint64_t seed = 17);

double mean_path_latency(const Dataset& data);
std::vector<int> default_buckets(const std::vector<model::TransformedSnapshot>& test,
                                 int width = 25);

}  // namespace netlat::trainer

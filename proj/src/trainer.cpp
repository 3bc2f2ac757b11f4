#include "netlat/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "netlat/rng.hpp"

namespace netlat::trainer {

using model::ModelConfig;
using model::TransformedSnapshot;
using tensor::Matrix;
using tensor::Tape;
using tensor::Var;

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j;
  j["lr"] = lr;
  j["epochs"] = epochs;
  j["samples_per_epoch"] = samples_per_epoch;
  j["seeds"] = seeds;
  j["lambda_path"] = lambda_path;
  j["lambda_link"] = lambda_link;
  j["patience"] = patience;
  j["grad_clip"] = grad_clip;
  j["jobs"] = jobs;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lr = j.value("lr", c.lr);
  c.epochs = j.value("epochs", c.epochs);
  c.samples_per_epoch = j.value("samples_per_epoch", c.samples_per_epoch);
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.lambda_path = j.value("lambda_path", c.lambda_path);
  c.lambda_link = j.value("lambda_link", c.lambda_link);
  c.patience = j.value("patience", c.patience);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.jobs = j.value("jobs", c.jobs);
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ValidationError("train config: lr must be > 0");
  if (epochs < 1) throw ValidationError("train config: epochs must be >= 1");
  if (samples_per_epoch < 1) throw ValidationError("train config: samples_per_epoch must be >= 1");
  if (seeds.empty()) throw ValidationError("train config: at least one seed required");
}

double mape(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth) {
  if (predicted.size() != truth.size()) {
    throw ValidationError("mape: size mismatch " + std::to_string(predicted.size()) + " vs " +
                          std::to_string(truth.size()));
  }
  if (truth.size() == 0) throw ValidationError("mape: empty input");
  double total = 0.0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    if (truth(i) == 0.0) {
      throw ValidationError("mape: zero truth entry at index " + std::to_string(i));
    }
    total += std::abs(predicted(i) - truth(i)) / std::abs(truth(i));
  }
  return 100.0 * total / static_cast<double>(truth.size());
}

Var loss_op(Tape& t, const model::ForwardResult& fwd, Var path_pred,
            const TransformedSnapshot& ts, double lambda_path, double lambda_link) {
  if (ts.truth_path.empty()) throw ValidationError("loss_op: snapshot has no ground truth");

  Matrix truth(static_cast<Eigen::Index>(ts.truth_path.size()), 1);
  for (std::size_t i = 0; i < ts.truth_path.size(); ++i) {
    truth(static_cast<Eigen::Index>(i), 0) = ts.truth_path[i];
  }
  Var diff = tensor::sub(path_pred, t.constant(truth));
  Var path_term = tensor::scale(
      tensor::reduce_mean(tensor::cdiv_const(tensor::abs_op(diff), truth.cwiseAbs())), 100.0);

  std::vector<int> occupied;
  for (std::size_t i = 0; i < ts.truth_occ.size(); ++i) {
    if (std::isfinite(ts.truth_occ[i]) && ts.truth_occ[i] > 0.0) {
      occupied.push_back(static_cast<int>(i));
    }
  }
  if (lambda_link == 0.0 || occupied.empty()) return tensor::scale(path_term, lambda_path);

  Matrix occ_truth(static_cast<Eigen::Index>(occupied.size()), 1);
  for (std::size_t i = 0; i < occupied.size(); ++i) {
    occ_truth(static_cast<Eigen::Index>(i), 0) = ts.truth_occ[static_cast<std::size_t>(occupied[i])];
  }
  Var occ_pred = tensor::rows(fwd.occupancy, occupied);
  Var occ_diff = tensor::sub(occ_pred, t.constant(occ_truth));
  Var occ_term = tensor::scale(
      tensor::reduce_mean(tensor::cdiv_const(tensor::abs_op(occ_diff), occ_truth.cwiseAbs())),
      100.0);
  return tensor::add(tensor::scale(path_term, lambda_path), tensor::scale(occ_term, lambda_link));
}

std::vector<model::TransformedSnapshot> transform_dataset(const Dataset& data, int n_roles,
                                                          int jobs) {
  std::vector<model::TransformedSnapshot> out(data.size());
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(data.size())));
  std::vector<std::thread> workers;
  std::atomic<std::size_t> cursor{0};
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&]() {
      for (std::size_t i = cursor.fetch_add(1); i < data.size(); i = cursor.fetch_add(1)) {
        out[i] = model::transform(data[i], n_roles);
      }
    });
  }
  for (auto& w : workers) w.join();
  return out;
}

namespace {

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

// path MAPE of one snapshot at inference settings
double inference_mape(const TransformedSnapshot& ts, const ModelConfig& mcfg,
                      tensor::ParamStore& params) {
  Tape t;
  auto fwd = model::forward(t, ts, mcfg, params, /*training=*/false);
  Var path = model::predict_path_latency(fwd.delay, ts);
  return mape(path.value().col(0), to_vector(ts.truth_path));
}

struct SeedContext {
  const std::vector<TransformedSnapshot>* train;
  const std::vector<TransformedSnapshot>* val;
  const ModelConfig* mcfg;
  const TrainConfig* tcfg;
};

SeedOutcome run_seed(std::uint64_t seed, const SeedContext& ctx) {
  const auto& train_set = *ctx.train;
  const auto& mcfg = *ctx.mcfg;
  const auto& tcfg = *ctx.tcfg;

  SeedOutcome outcome;
  outcome.seed = seed;
  tensor::ParamStore params = model::init_params(mcfg, 3, seed);
  tensor::ParamStore best = params;
  double best_val = std::numeric_limits<double>::max();
  int since_best = 0;

  Rng base(seed);
  std::vector<int> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    Rng erng = base.fork(static_cast<std::uint64_t>(epoch) + 1);
    erng.shuffle(order);
    const int steps = std::min<int>(tcfg.samples_per_epoch, static_cast<int>(order.size()));
    double epoch_mape = 0.0;
    for (int s = 0; s < steps; ++s) {
      const TransformedSnapshot& ts = train_set[static_cast<std::size_t>(order[static_cast<std::size_t>(s)])];
      const std::uint64_t drop_seed = erng.next_u64();
      Tape t;
      auto fwd = model::forward(t, ts, mcfg, params, /*training=*/true, drop_seed);
      Var path = model::predict_path_latency(fwd.delay, ts);
      Var loss = loss_op(t, fwd, path, ts, tcfg.lambda_path, tcfg.lambda_link);
      const double loss_value = loss.value()(0, 0);
      if (!std::isfinite(loss_value)) {
        outcome.diverged = true;
        outcome.epochs_run = epoch;
        return outcome;
      }
      params.zero_grads();
      t.backward(loss);
      if (tcfg.grad_clip > 0.0) {
        double norm_sq = 0.0;
        for (const auto& [name, p] : params.entries()) norm_sq += p.grad.squaredNorm();
        if (norm_sq > tcfg.grad_clip * tcfg.grad_clip) {
          const double scale = tcfg.grad_clip / std::sqrt(norm_sq);
          for (auto& [name, p] : params.entries()) p.grad *= scale;
        }
      }
      tensor::adam_step(params, tcfg.lr);
      epoch_mape += mape(path.value().col(0), to_vector(ts.truth_path));
    }
    outcome.train_mape.push_back(epoch_mape / std::max(1, steps));

    if (!ctx.val->empty()) {
      double val_total = 0.0;
      for (const auto& ts : *ctx.val) val_total += inference_mape(ts, mcfg, params);
      const double val = val_total / static_cast<double>(ctx.val->size());
      outcome.val_mape.push_back(val);
      // only a meaningful improvement resets patience
      const double min_delta = std::max(1e-9, 1e-6 * best_val);
      if (val < best_val - min_delta) {
        best_val = val;
        best = params;
        outcome.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best > tcfg.patience) {
        outcome.epochs_run = epoch + 1;
        outcome.best_params = std::move(best);
        return outcome;
      }
    } else {
      best = params;
      outcome.best_epoch = epoch;
    }
    outcome.epochs_run = epoch + 1;
  }
  outcome.best_params = std::move(best);
  return outcome;
}

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

}  // namespace

EvalResult evaluate(const tensor::ParamStore& params, const ModelConfig& mcfg,
                    const std::vector<TransformedSnapshot>& test,
                    const std::vector<int>& bucket_edges) {
  if (bucket_edges.size() < 2) throw ValidationError("evaluate: need at least two bucket edges");
  for (std::size_t i = 1; i < bucket_edges.size(); ++i) {
    if (bucket_edges[i] <= bucket_edges[i - 1]) {
      throw ValidationError("evaluate: bucket edges must be strictly increasing");
    }
  }

  EvalResult result;
  tensor::ParamStore frozen = params;  // local copy; evaluation never mutates inputs
  std::vector<double> times_ms;
  for (const auto& ts : test) {
    const auto t0 = std::chrono::steady_clock::now();
    Tape t;
    auto fwd = model::forward(t, ts, mcfg, frozen, /*training=*/false);
    Var path = model::predict_path_latency(fwd.delay, ts);
    const Eigen::VectorXd pred = path.value().col(0);
    const auto t1 = std::chrono::steady_clock::now();
    times_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    result.per_snapshot_mape.push_back(mape(pred, to_vector(ts.truth_path)));
    result.per_snapshot_nodes.push_back(ts.n_nodes);
  }

  const int n_buckets = static_cast<int>(bucket_edges.size()) - 1;
  std::vector<std::vector<double>> bucket_mapes(static_cast<std::size_t>(n_buckets));
  std::vector<std::vector<double>> bucket_times(static_cast<std::size_t>(n_buckets));
  for (std::size_t i = 0; i < test.size(); ++i) {
    const int n = result.per_snapshot_nodes[i];
    for (int b = 0; b < n_buckets; ++b) {
      const bool last = b == n_buckets - 1;
      if (n >= bucket_edges[static_cast<std::size_t>(b)] &&
          (last ? n <= bucket_edges[static_cast<std::size_t>(b + 1)]
                : n < bucket_edges[static_cast<std::size_t>(b + 1)])) {
        bucket_mapes[static_cast<std::size_t>(b)].push_back(result.per_snapshot_mape[i]);
        bucket_times[static_cast<std::size_t>(b)].push_back(times_ms[i]);
        break;
      }
    }
  }
  for (int b = 0; b < n_buckets; ++b) {
    const auto& xs = bucket_mapes[static_cast<std::size_t>(b)];
    if (xs.empty()) continue;  // empty buckets are absent, not zero
    BucketStat stat;
    stat.lo = bucket_edges[static_cast<std::size_t>(b)];
    stat.hi = bucket_edges[static_cast<std::size_t>(b + 1)];
    stat.count = static_cast<int>(xs.size());
    stat.mape_mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    stat.mape_std = sample_std(xs, stat.mape_mean);
    const auto& ts = bucket_times[static_cast<std::size_t>(b)];
    stat.infer_ms_mean = std::accumulate(ts.begin(), ts.end(), 0.0) / static_cast<double>(ts.size());
    result.buckets.push_back(stat);
  }
  if (!result.per_snapshot_mape.empty()) {
    result.overall_mape =
        std::accumulate(result.per_snapshot_mape.begin(), result.per_snapshot_mape.end(), 0.0) /
        static_cast<double>(result.per_snapshot_mape.size());
    result.overall_infer_ms = std::accumulate(times_ms.begin(), times_ms.end(), 0.0) /
                              static_cast<double>(times_ms.size());
  }
  return result;
}

TrainReport train(const Dataset& train_set, const Dataset& val_set, const Dataset& test_set,
                  const ModelConfig& mcfg, const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.validate();
  if (train_set.empty()) throw ValidationError("train: empty training set");

  const auto train_ts = transform_dataset(train_set, mcfg.n_roles, tcfg.jobs);
  const auto val_ts = transform_dataset(val_set, mcfg.n_roles, tcfg.jobs);
  const auto test_ts = transform_dataset(test_set, mcfg.n_roles, tcfg.jobs);
  for (const auto& ts : train_ts) {
    if (ts.truth_path.empty()) throw ValidationError("train: snapshot without ground truth");
  }

  SeedContext ctx{&train_ts, &val_ts, &mcfg, &tcfg};
  TrainReport report;
  report.model_config = mcfg.to_json();
  report.train_config = tcfg.to_json();
  report.config_label = mcfg.readout;
  report.seeds.resize(tcfg.seeds.size());

  int jobs = tcfg.jobs > 0 ? tcfg.jobs : static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(tcfg.seeds.size())));
  std::atomic<std::size_t> cursor{0};
  std::vector<std::thread> workers;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&]() {
      for (std::size_t i = cursor.fetch_add(1); i < tcfg.seeds.size(); i = cursor.fetch_add(1)) {
        report.seeds[i] = run_seed(tcfg.seeds[i], ctx);
      }
    });
  }
  for (auto& w : workers) w.join();

  if (!test_ts.empty()) {
    const auto edges = default_buckets(test_ts);
    for (auto& outcome : report.seeds) {
      if (!outcome.diverged) {
        outcome.test = evaluate(outcome.best_params, mcfg, test_ts, edges);
      }
    }
  }
  return report;
}

nlohmann::json TrainReport::to_json() const {
  nlohmann::json j;
  j["config_label"] = config_label;
  j["model_config"] = model_config;
  j["train_config"] = train_config;
  j["config_hash"] = tensor::config_hash(model_config);
  nlohmann::json seed_arr = nlohmann::json::array();
  for (const auto& s : seeds) {
    nlohmann::json sj;
    sj["seed"] = s.seed;
    sj["diverged"] = s.diverged;
    sj["epochs_run"] = s.epochs_run;
    sj["best_epoch"] = s.best_epoch;
    sj["train_mape"] = s.train_mape;
    sj["val_mape"] = s.val_mape;
    nlohmann::json buckets = nlohmann::json::array();
    for (const auto& b : s.test.buckets) {
      buckets.push_back({{"lo", b.lo},
                         {"hi", b.hi},
                         {"count", b.count},
                         {"mape_mean", b.mape_mean},
                         {"mape_std", b.mape_std},
                         {"infer_ms_mean", b.infer_ms_mean}});
    }
    sj["test_buckets"] = std::move(buckets);
    sj["test_overall_mape"] = s.test.overall_mape;
    seed_arr.push_back(std::move(sj));
  }
  j["seeds"] = std::move(seed_arr);

  // cross-seed aggregation per bucket
  std::map<std::pair<int, int>, std::vector<double>> by_bucket;
  for (const auto& s : seeds) {
    if (s.diverged) continue;
    for (const auto& b : s.test.buckets) by_bucket[{b.lo, b.hi}].push_back(b.mape_mean);
  }
  nlohmann::json agg = nlohmann::json::array();
  for (const auto& [key, xs] : by_bucket) {
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    agg.push_back({{"lo", key.first},
                   {"hi", key.second},
                   {"mape_mean", mean},
                   {"mape_std", sample_std(xs, mean)},
                   {"n_seeds", xs.size()}});
  }
  j["aggregate_buckets"] = std::move(agg);
  return j;
}

std::string TrainReport::to_csv() const {
  std::ostringstream out;
  out << "config,seed,bucket_lo,bucket_hi,mape_mean,mape_std,infer_ms_mean\n";
  for (const auto& s : seeds) {
    for (const auto& b : s.test.buckets) {
      out << config_label << ',' << s.seed << ',' << b.lo << ',' << b.hi << ',' << b.mape_mean
          << ',' << b.mape_std << ',' << b.infer_ms_mean << '\n';
    }
  }
  return out.str();
}

AblationReport ablate(const Dataset& train_set, const Dataset& val_set, const Dataset& test_set,
                      const ModelConfig& base, const TrainConfig& tcfg) {
  AblationReport report;
  for (const std::string readout : {"nalu", "mlp"}) {
    ModelConfig cfg = base;
    cfg.readout = readout;
    TrainReport run = train(train_set, val_set, test_set, cfg, tcfg);
    run.config_label = readout;
    report.runs.push_back(std::move(run));
  }

  nlohmann::json table = nlohmann::json::array();
  for (const auto& run : report.runs) {
    std::map<std::pair<int, int>, std::vector<double>> by_bucket;
    for (const auto& s : run.seeds) {
      if (s.diverged) continue;
      for (const auto& b : s.test.buckets) by_bucket[{b.lo, b.hi}].push_back(b.mape_mean);
    }
    for (const auto& [key, xs] : by_bucket) {
      const double mean =
          std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
      nlohmann::json row;
      row["config"] = run.config_label;
      row["bucket_lo"] = key.first;
      row["bucket_hi"] = key.second;
      row["mape_mean"] = mean;
      if (xs.size() >= 2) {
        const double sd = sample_std(xs, mean);
        row["mape_variance"] = sd * sd;
      } else {
        row["mape_variance"] = "n/a";  // single seed has no spread
      }
      row["n_seeds"] = xs.size();
      table.push_back(std::move(row));
    }
  }
  report.table = std::move(table);
  return report;
}

nlohmann::json AblationReport::to_json() const {
  nlohmann::json j;
  j["table"] = table;
  nlohmann::json runs_json = nlohmann::json::array();
  for (const auto& r : runs) runs_json.push_back(r.to_json());
  j["runs"] = std::move(runs_json);
  return j;
}

std::string AblationReport::to_csv() const {
  std::ostringstream out;
  out << "config,bucket_lo,bucket_hi,mape_mean,mape_variance,n_seeds\n";
  for (const auto& row : table) {
    out << row.at("config").get<std::string>() << ',' << row.at("bucket_lo") << ','
        << row.at("bucket_hi") << ',' << row.at("mape_mean") << ',';
    if (row.at("mape_variance").is_string()) {
      out << "n/a";
    } else {
      out << row.at("mape_variance");
    }
    out << ',' << row.at("n_seeds") << '\n';
  }
  return out.str();
}

SplitDataset split_by_size(const Dataset& all, int max_train_n, double val_fraction,
                           std::uint64_t seed) {
  SplitDataset split;
  Dataset large;
  for (const auto& s : all) {
    (s.topology.n <= max_train_n ? split.train : large).push_back(s);
  }
  std::vector<int> idx(large.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  Rng rng(seed);
  rng.shuffle(idx);
  const std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(large.size())));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < n_val ? split.val : split.test).push_back(large[static_cast<std::size_t>(idx[i])]);
  }
  return split;
}

double mean_path_latency(const Dataset& data) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& s : data) {
    if (!s.performance) continue;
    for (double v : s.performance->path_latency) {
      total += v;
      ++count;
    }
  }
  if (count == 0) throw ValidationError("mean_path_latency: no ground truth in dataset");
  return total / static_cast<double>(count);
}

std::vector<int> default_buckets(const std::vector<model::TransformedSnapshot>& test, int width) {
  int lo = std::numeric_limits<int>::max();
  int hi = std::numeric_limits<int>::min();
  for (const auto& ts : test) {
    lo = std::min(lo, ts.n_nodes);
    hi = std::max(hi, ts.n_nodes);
  }
  std::vector<int> edges;
  const int start = lo / width * width;
  for (int e = start; e <= hi + width; e += width) edges.push_back(e);
  return edges;
}

}  // namespace netlat::trainer

// netlat: generate routing-network snapshots, transform them to line graphs,
// and train/evaluate the latency model.

#include <CLI11.hpp>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "netlat/linegraph.hpp"
#include "netlat/manifest.hpp"
#include "netlat/model.hpp"
#include "netlat/netmodel.hpp"
#include "netlat/oracle.hpp"
#include "netlat/rng.hpp"
#include "netlat/roles.hpp"
#include "netlat/tensor.hpp"
#include "netlat/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace netlat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;       // input/validation error
constexpr int kExitConfig = 3;      // config/checkpoint mismatch
constexpr int kExitDivergence = 4;  // numerical divergence

std::uint64_t default_seed() {
  if (const char* env = std::getenv("NETLAT_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return 1;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) seeds.push_back(std::strtoull(item.c_str(), nullptr, 10));
  }
  if (seeds.empty()) throw ValidationError("empty seed list");
  return seeds;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open output file: " + path);
  out << text;
}

RunManifest make_manifest(const std::string& command, std::uint64_t seed) {
  RunManifest m;
  m.command = command;
  m.seed = seed;
  m.timestamp = current_timestamp();
  return m;
}

// --- gen -------------------------------------------------------------------

struct GenOptions {
  std::string preset;
  int n_min = 0, n_max = 0;
  int count = 10;
  double degree = 0.0, degree_std = -1.0;
  double pairs_per_node = 2.0;
  double max_util = 0.95;
  double packet_size = 1000.0;
  std::string levels = "10000,25000,40000,100000";
  std::uint64_t seed = default_seed();
  std::string out;
  int jobs = 0;
};

int run_gen(const GenOptions& opt_in) {
  GenOptions opt = opt_in;
  if (opt.preset == "train") {
    if (opt.n_min == 0) opt.n_min = 25;
    if (opt.n_max == 0) opt.n_max = 50;
    if (opt.degree == 0.0) opt.degree = 9.778;
    if (opt.degree_std < 0.0) opt.degree_std = 0.9491;
  } else if (opt.preset == "test") {
    if (opt.n_min == 0) opt.n_min = 50;
    if (opt.n_max == 0) opt.n_max = 300;
    if (opt.degree == 0.0) opt.degree = 9.523;
    if (opt.degree_std < 0.0) opt.degree_std = 1.268;
  } else if (!opt.preset.empty()) {
    throw ValidationError("unknown preset '" + opt.preset + "' (use train|test)");
  }
  if (opt.n_min == 0) opt.n_min = 25;
  if (opt.n_max == 0) opt.n_max = std::max(opt.n_min, 50);
  if (opt.degree == 0.0) opt.degree = 9.778;
  if (opt.degree_std < 0.0) opt.degree_std = 0.0;
  if (opt.n_min < 3 || opt.n_max < opt.n_min) throw ValidationError("bad size range");

  const auto levels = parse_double_list(opt.levels);
  if (opt.degree > static_cast<double>(opt.n_max - 1)) {
    throw ValidationError("target mean degree " + std::to_string(opt.degree) +
                          " is infeasible for every size up to n-max " +
                          std::to_string(opt.n_max));
  }

  auto clamp_degree = [&](int n, double degree) {
    const double lo = 2.0 * (n - 1.0) / n / 0.85;  // spanning tree within tolerance
    return std::clamp(degree, lo, static_cast<double>(n - 1));
  };

  // probe the remaining parameters on the smallest size before bulk generation
  {
    oracle::SnapshotParams probe;
    probe.n = opt.n_min;
    probe.mean_degree = clamp_degree(opt.n_min, opt.degree);
    probe.capacity_levels = levels;
    probe.pairs_per_node = opt.pairs_per_node;
    probe.max_utilization = opt.max_util;
    probe.mean_packet_size = opt.packet_size;
    oracle::generate_snapshot(probe, opt.seed);
  }

  std::vector<NetworkSnapshot> dataset(static_cast<std::size_t>(opt.count));
  Rng rng(opt.seed);
  struct Draw {
    int n;
    double degree;
    std::uint64_t seed;
  };
  std::vector<Draw> draws;
  for (int i = 0; i < opt.count; ++i) {
    Draw d;
    d.n = rng.uniform_int(opt.n_min, opt.n_max);
    d.degree = clamp_degree(d.n, opt.degree + opt.degree_std * rng.normal());
    d.seed = rng.next_u64();
    draws.push_back(d);
  }

  int jobs = opt.jobs > 0 ? opt.jobs : static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, opt.count));
  std::atomic<std::size_t> cursor{0};
  std::vector<std::thread> workers;
  std::atomic<bool> failed{false};
  std::string error_text;
  std::mutex error_mutex;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&]() {
      for (std::size_t i = cursor.fetch_add(1); i < draws.size(); i = cursor.fetch_add(1)) {
        if (failed.load()) return;
        try {
          oracle::SnapshotParams p;
          p.n = draws[i].n;
          p.mean_degree = draws[i].degree;
          p.capacity_levels = levels;
          p.pairs_per_node = opt.pairs_per_node;
          p.max_utilization = opt.max_util;
          p.mean_packet_size = opt.packet_size;
          dataset[i] = oracle::generate_snapshot(p, draws[i].seed);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(error_mutex);
          error_text = e.what();
          failed.store(true);
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failed.load()) throw ValidationError("generation failed: " + error_text);

  save_dataset_file(dataset, opt.out);
  RunManifest manifest = make_manifest("gen", opt.seed);
  manifest.args = {"n=[" + std::to_string(opt.n_min) + "," + std::to_string(opt.n_max) + "]",
                   "count=" + std::to_string(opt.count), "degree=" + std::to_string(opt.degree)};
  manifest.outputs = {opt.out};
  manifest.inputs.push_back({opt.out, hash_file(opt.out)});
  manifest.write(fs::path(opt.out).parent_path().empty()
                     ? "."
                     : fs::path(opt.out).parent_path().string());
  std::cout << "wrote " << dataset.size() << " snapshots to " << opt.out << "\n";
  return kExitOk;
}

// --- transform ---------------------------------------------------------------

json dump_transform(const model::TransformedSnapshot& ts) {
  json j;
  json lnodes = json::array();
  for (const auto& l : ts.lg.lnodes) lnodes.push_back({l.u, l.v});
  j["lnodes"] = std::move(lnodes);
  json ledges = json::array();
  for (const auto& e : ts.lg.ledges) ledges.push_back({e.src, e.dst, e.weight});
  j["ledges"] = std::move(ledges);
  json features = json::array();
  for (Eigen::Index r = 0; r < ts.lg.node_features.rows(); ++r) {
    features.push_back({ts.lg.node_features(r, 0), ts.lg.node_features(r, 1),
                        ts.lg.node_features(r, 2)});
  }
  j["features"] = std::move(features);
  j["trajectories"] = ts.lg.trajectories;
  j["roles"] = ts.roles.role_of;
  return j;
}

int run_transform(const std::string& in, const std::string& out, int n_roles,
                  const std::string& dump) {
  const auto dataset = load_dataset_file(in);
  std::ostringstream summary, dump_stream;
  for (const auto& snapshot : dataset) {
    const auto ts = model::transform(snapshot, n_roles);
    json line;
    line["n"] = ts.n_nodes;
    line["lnodes"] = ts.lg.lnodes.size();
    line["ledges"] = ts.lg.ledges.size();
    line["n_pairs"] = ts.n_pairs;
    line["effective_roles"] = ts.roles.effective_roles;
    line["role_adjacency_pairs"] = ts.role_adj.pairs.size();
    summary << line.dump() << '\n';
    if (!dump.empty()) dump_stream << dump_transform(ts).dump() << '\n';
  }
  write_text(out, summary.str());
  if (!dump.empty()) write_text(dump, dump_stream.str());

  RunManifest manifest = make_manifest("transform", 0);
  manifest.add_input(in);
  manifest.outputs = {out};
  if (!dump.empty()) manifest.outputs.push_back(dump);
  manifest.write(fs::path(out).parent_path().empty() ? "."
                                                     : fs::path(out).parent_path().string());
  return kExitOk;
}

// --- train -------------------------------------------------------------------

struct TrainOptions {
  std::string data, val, test, out_dir;
  std::string model_config_path, train_config_path;
  std::string seeds;
  int epochs = -1, samples = -1, patience = -1, jobs = 0;
  double lr = -1.0;
  std::string readout;
};

int run_train(const TrainOptions& opt) {
  model::ModelConfig mcfg;
  if (!opt.model_config_path.empty()) {
    std::ifstream f(opt.model_config_path);
    if (!f) throw ParseError("cannot open model config: " + opt.model_config_path);
    json j;
    f >> j;
    mcfg = model::ModelConfig::from_json(j);
  }
  trainer::TrainConfig tcfg;
  if (!opt.train_config_path.empty()) {
    std::ifstream f(opt.train_config_path);
    if (!f) throw ParseError("cannot open train config: " + opt.train_config_path);
    json j;
    f >> j;
    tcfg = trainer::TrainConfig::from_json(j);
  }
  if (!opt.seeds.empty()) tcfg.seeds = parse_seed_list(opt.seeds);
  if (opt.epochs > 0) tcfg.epochs = opt.epochs;
  if (opt.samples > 0) tcfg.samples_per_epoch = opt.samples;
  if (opt.patience >= 0) tcfg.patience = opt.patience;
  if (opt.lr > 0) tcfg.lr = opt.lr;
  if (opt.jobs > 0) tcfg.jobs = opt.jobs;
  if (!opt.readout.empty()) mcfg.readout = opt.readout;

  trainer::Dataset train_set, val_set, test_set;
  if (!opt.val.empty() || !opt.test.empty()) {
    train_set = load_dataset_file(opt.data);
    if (!opt.val.empty()) val_set = load_dataset_file(opt.val);
    if (!opt.test.empty()) test_set = load_dataset_file(opt.test);
  } else {
    const auto split = trainer::split_by_size(load_dataset_file(opt.data));
    train_set = split.train;
    val_set = split.val;
    test_set = split.test;
  }
  if (train_set.empty()) throw ValidationError("training set is empty");

  auto report = trainer::train(train_set, val_set, test_set, mcfg, tcfg);

  fs::create_directories(opt.out_dir);
  int usable = 0;
  for (const auto& outcome : report.seeds) {
    if (outcome.diverged) continue;
    ++usable;
    const std::string path =
        (fs::path(opt.out_dir) / ("ckpt_seed" + std::to_string(outcome.seed) + ".json")).string();
    tensor::save_checkpoint(outcome.best_params, mcfg.to_json(), path);
  }
  write_text((fs::path(opt.out_dir) / "report.json").string(), report.to_json().dump(2) + "\n");
  write_text((fs::path(opt.out_dir) / "report.csv").string(), report.to_csv());
  write_text((fs::path(opt.out_dir) / "model_config.json").string(),
             mcfg.to_json().dump(2) + "\n");

  RunManifest manifest = make_manifest("train", tcfg.seeds.front());
  manifest.add_input(opt.data);
  if (!opt.val.empty()) manifest.add_input(opt.val);
  if (!opt.test.empty()) manifest.add_input(opt.test);
  manifest.outputs = {(fs::path(opt.out_dir) / "report.json").string()};
  manifest.write(opt.out_dir);

  if (usable == 0) throw DivergenceError("all seeds diverged");
  std::cout << report.to_csv();
  return kExitOk;
}

// --- predict -----------------------------------------------------------------

int run_predict(const std::string& ckpt_path, const std::string& in, const std::string& out) {
  auto ckpt = tensor::load_checkpoint(ckpt_path);
  const auto mcfg = model::ModelConfig::from_json(ckpt.config);
  const auto dataset = load_dataset_file(in);
  std::ostringstream lines;
  for (const auto& snapshot : dataset) {
    const auto ts = model::transform(snapshot, mcfg.n_roles);
    tensor::Tape t;
    auto fwd = model::forward(t, ts, mcfg, ckpt.params, /*training=*/false);
    auto path = model::predict_path_latency(fwd.delay, ts);
    json j;
    std::vector<double> latencies;
    for (Eigen::Index i = 0; i < path.value().rows(); ++i) latencies.push_back(path.value()(i, 0));
    j["path_latency_pred"] = std::move(latencies);
    j["n"] = ts.n_nodes;
    lines << j.dump() << '\n';
  }
  write_text(out, lines.str());
  RunManifest manifest = make_manifest("predict", 0);
  manifest.add_input(ckpt_path);
  manifest.add_input(in);
  manifest.outputs = {out};
  manifest.write(fs::path(out).parent_path().empty() ? "."
                                                     : fs::path(out).parent_path().string());
  return kExitOk;
}

// --- evaluate ----------------------------------------------------------------

int run_evaluate(const std::vector<std::string>& ckpts, const std::string& data,
                 const std::string& buckets_text, const std::string& out_dir,
                 const std::string& model_config_path) {
  const auto dataset = load_dataset_file(data);
  json results = json::array();
  std::string csv = "config,seed,bucket_lo,bucket_hi,mape_mean,mape_std,infer_ms_mean\n";
  int index = 0;
  for (const auto& ckpt_path : ckpts) {
    auto ckpt = tensor::load_checkpoint(ckpt_path);
    if (!model_config_path.empty()) {
      std::ifstream f(model_config_path);
      if (!f) throw ParseError("cannot open model config: " + model_config_path);
      json j;
      f >> j;
      if (tensor::config_hash(j) != ckpt.hash) {
        throw ConfigMismatchError("checkpoint " + ckpt_path +
                                  " was trained with a different config");
      }
    }
    const auto mcfg = model::ModelConfig::from_json(ckpt.config);
    const auto test_ts = trainer::transform_dataset(dataset, mcfg.n_roles);
    std::vector<int> edges = buckets_text.empty() ? trainer::default_buckets(test_ts)
                                                  : parse_int_list(buckets_text);
    const auto eval = trainer::evaluate(ckpt.params, mcfg, test_ts, edges);
    json r;
    r["checkpoint"] = ckpt_path;
    r["overall_mape"] = eval.overall_mape;
    r["overall_infer_ms"] = eval.overall_infer_ms;
    json buckets = json::array();
    for (const auto& b : eval.buckets) {
      buckets.push_back({{"lo", b.lo},
                         {"hi", b.hi},
                         {"count", b.count},
                         {"mape_mean", b.mape_mean},
                         {"mape_std", b.mape_std},
                         {"infer_ms_mean", b.infer_ms_mean}});
      csv += mcfg.readout + "," + std::to_string(index) + "," + std::to_string(b.lo) + "," +
             std::to_string(b.hi) + "," + std::to_string(b.mape_mean) + "," +
             std::to_string(b.mape_std) + "," + std::to_string(b.infer_ms_mean) + "\n";
    }
    r["buckets"] = std::move(buckets);
    results.push_back(std::move(r));
    ++index;
  }
  fs::create_directories(out_dir);
  write_text((fs::path(out_dir) / "eval.json").string(), results.dump(2) + "\n");
  write_text((fs::path(out_dir) / "eval.csv").string(), csv);
  RunManifest manifest = make_manifest("evaluate", 0);
  manifest.add_input(data);
  for (const auto& c : ckpts) manifest.add_input(c);
  manifest.outputs = {(fs::path(out_dir) / "eval.json").string()};
  manifest.write(out_dir);
  std::cout << results.dump(2) << "\n";
  return kExitOk;
}

// --- ablate ------------------------------------------------------------------

int run_ablate(const std::string& data, const std::string& val, const std::string& test,
               const std::string& out_dir, const std::string& seeds_text, int epochs, int samples,
               int jobs) {
  trainer::Dataset train_set, val_set, test_set;
  if (!val.empty() || !test.empty()) {
    train_set = load_dataset_file(data);
    if (!val.empty()) val_set = load_dataset_file(val);
    if (!test.empty()) test_set = load_dataset_file(test);
  } else {
    const auto split = trainer::split_by_size(load_dataset_file(data));
    train_set = split.train;
    val_set = split.val;
    test_set = split.test;
  }
  model::ModelConfig mcfg;
  trainer::TrainConfig tcfg;
  if (!seeds_text.empty()) tcfg.seeds = parse_seed_list(seeds_text);
  if (epochs > 0) tcfg.epochs = epochs;
  if (samples > 0) tcfg.samples_per_epoch = samples;
  if (jobs > 0) tcfg.jobs = jobs;

  const auto report = trainer::ablate(train_set, val_set, test_set, mcfg, tcfg);
  fs::create_directories(out_dir);
  write_text((fs::path(out_dir) / "ablation.json").string(), report.to_json().dump(2) + "\n");
  write_text((fs::path(out_dir) / "ablation.csv").string(), report.to_csv());
  RunManifest manifest = make_manifest("ablate", tcfg.seeds.front());
  manifest.add_input(data);
  manifest.outputs = {(fs::path(out_dir) / "ablation.json").string()};
  manifest.write(out_dir);
  std::cout << report.to_csv();
  return kExitOk;
}

// --- report ------------------------------------------------------------------

std::string polyline_svg(const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>& series,
                         const std::string& x_label, const std::string& y_label) {
  const int width = 640, height = 420, margin = 50;
  double x_min = 1e300, x_max = -1e300, y_min = 0.0, y_max = -1e300;
  for (const auto& [name, pts] : series) {
    for (const auto& [x, y] : pts) {
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_max = std::max(y_max, y);
    }
  }
  if (x_max <= x_min) x_max = x_min + 1.0;
  if (y_max <= y_min) y_max = y_min + 1.0;
  auto sx = [&](double x) {
    return margin + (x - x_min) / (x_max - x_min) * (width - 2 * margin);
  };
  auto sy = [&](double y) {
    return height - margin - (y - y_min) / (y_max - y_min) * (height - 2 * margin);
  };
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<line x1='" << margin << "' y1='" << height - margin << "' x2='" << width - margin
      << "' y2='" << height - margin << "' stroke='black'/>\n";
  svg << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
      << height - margin << "' stroke='black'/>\n";
  svg << "<text x='" << width / 2 << "' y='" << height - 10 << "' text-anchor='middle'>"
      << x_label << "</text>\n";
  svg << "<text x='15' y='" << height / 2 << "' transform='rotate(-90 15 " << height / 2
      << ")' text-anchor='middle'>" << y_label << "</text>\n";
  int color_index = 0;
  int legend_y = margin;
  for (const auto& [name, pts] : series) {
    const char* color = colors[color_index % 5];
    svg << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
    for (const auto& [x, y] : pts) svg << sx(x) << "," << sy(y) << " ";
    svg << "'/>\n";
    for (const auto& [x, y] : pts) {
      svg << "<circle cx='" << sx(x) << "' cy='" << sy(y) << "' r='3' fill='" << color << "'/>\n";
    }
    svg << "<text x='" << width - margin - 120 << "' y='" << legend_y << "' fill='" << color
        << "'>" << name << "</text>\n";
    legend_y += 18;
    ++color_index;
  }
  svg << "</svg>\n";
  return svg.str();
}

int run_report(const std::string& in, const std::string& out_dir) {
  std::ifstream f(in);
  if (!f) throw ParseError("cannot open report: " + in);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report JSON: ") + e.what());
  }
  fs::create_directories(out_dir);

  // accepts either a train report or an ablation report
  std::vector<json> reports;
  if (j.contains("runs")) {
    for (const auto& r : j.at("runs")) reports.push_back(r);
  } else {
    reports.push_back(j);
  }

  std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> series;
  std::string csv = "config,bucket_lo,bucket_hi,mape_mean,mape_std\n";
  for (const auto& r : reports) {
    const std::string label = r.value("config_label", std::string("model"));
    std::vector<std::pair<double, double>> pts;
    for (const auto& b : r.at("aggregate_buckets")) {
      const double mid = (b.at("lo").get<double>() + b.at("hi").get<double>()) / 2.0;
      pts.push_back({mid, b.at("mape_mean").get<double>()});
      csv += label + "," + std::to_string(b.at("lo").get<int>()) + "," +
             std::to_string(b.at("hi").get<int>()) + "," +
             std::to_string(b.at("mape_mean").get<double>()) + "," +
             std::to_string(b.at("mape_std").get<double>()) + "\n";
    }
    std::sort(pts.begin(), pts.end());
    series.push_back({label, std::move(pts)});
  }
  write_text((fs::path(out_dir) / "size_curve.csv").string(), csv);
  write_text((fs::path(out_dir) / "size_curve.svg").string(),
             polyline_svg(series, "topology size", "MAPE (%)"));

  if (j.contains("table")) {
    std::string ab_csv = "config,bucket_lo,bucket_hi,mape_mean,mape_variance,n_seeds\n";
    std::map<std::string, std::vector<std::pair<double, double>>> ab_series;
    for (const auto& row : j.at("table")) {
      const std::string config = row.at("config").get<std::string>();
      const double lo = row.at("bucket_lo").get<double>();
      const double hi = row.at("bucket_hi").get<double>();
      ab_csv += config + "," + std::to_string(row.at("bucket_lo").get<int>()) + "," +
                std::to_string(row.at("bucket_hi").get<int>()) + "," +
                std::to_string(row.at("mape_mean").get<double>()) + ",";
      ab_csv += row.at("mape_variance").is_string()
                    ? row.at("mape_variance").get<std::string>()
                    : std::to_string(row.at("mape_variance").get<double>());
      ab_csv += "," + std::to_string(row.at("n_seeds").get<int>()) + "\n";
      ab_series[config].push_back({(lo + hi) / 2.0, row.at("mape_mean").get<double>()});
    }
    write_text((fs::path(out_dir) / "ablation.csv").string(), ab_csv);
    std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> series2;
    for (auto& [config, pts] : ab_series) {
      std::sort(pts.begin(), pts.end());
      series2.push_back({config, pts});
    }
    write_text((fs::path(out_dir) / "ablation.svg").string(),
               polyline_svg(series2, "topology size", "MAPE (%)"));
  }
  RunManifest manifest = make_manifest("report", 0);
  manifest.add_input(in);
  manifest.outputs = {(fs::path(out_dir) / "size_curve.csv").string()};
  manifest.write(out_dir);
  return kExitOk;
}

// --- mape --------------------------------------------------------------------

int run_mape(const std::string& pred_path, const std::string& truth_path) {
  std::ifstream f(pred_path);
  if (!f) throw ParseError("cannot open predictions: " + pred_path);
  std::vector<std::vector<double>> predictions;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("predictions JSON: ") + e.what());
    }
    predictions.push_back(j.at("path_latency_pred").get<std::vector<double>>());
  }
  const auto dataset = load_dataset_file(truth_path);
  if (predictions.size() != dataset.size()) {
    throw ValidationError("prediction count " + std::to_string(predictions.size()) +
                          " does not match dataset size " + std::to_string(dataset.size()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!dataset[i].performance) throw ValidationError("snapshot without ground truth");
    const auto& truth = dataset[i].performance->path_latency;
    Eigen::VectorXd p(static_cast<Eigen::Index>(predictions[i].size()));
    Eigen::VectorXd t(static_cast<Eigen::Index>(truth.size()));
    for (std::size_t k = 0; k < predictions[i].size(); ++k) p(static_cast<Eigen::Index>(k)) = predictions[i][k];
    for (std::size_t k = 0; k < truth.size(); ++k) t(static_cast<Eigen::Index>(k)) = truth[k];
    total += trainer::mape(p, t);
  }
  std::cout << total / static_cast<double>(dataset.size()) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"line-graph latency model over routing-network snapshots"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* cmd_gen = app.add_subcommand("gen", "generate snapshots with queueing ground truth");
  cmd_gen->add_option("--preset", gen.preset, "train|test size/degree preset");
  cmd_gen->add_option("--n-min", gen.n_min);
  cmd_gen->add_option("--n-max", gen.n_max);
  cmd_gen->add_option("--count", gen.count);
  cmd_gen->add_option("--degree", gen.degree, "target mean degree");
  cmd_gen->add_option("--degree-std", gen.degree_std);
  cmd_gen->add_option("--pairs-per-node", gen.pairs_per_node);
  cmd_gen->add_option("--max-util", gen.max_util);
  cmd_gen->add_option("--packet-size", gen.packet_size);
  cmd_gen->add_option("--levels", gen.levels, "comma-separated capacity levels");
  cmd_gen->add_option("--seed", gen.seed);
  cmd_gen->add_option("--out", gen.out)->required();
  cmd_gen->add_option("--jobs", gen.jobs);

  std::string tr_in, tr_out, tr_dump;
  int tr_roles = 5;
  auto* cmd_transform = app.add_subcommand("transform", "line-graph + role transform");
  cmd_transform->add_option("--in", tr_in)->required();
  cmd_transform->add_option("--out", tr_out)->required();
  cmd_transform->add_option("--n-roles", tr_roles);
  cmd_transform->add_option("--dump", tr_dump, "write full debug JSONL here");

  TrainOptions train_opt;
  auto* cmd_train = app.add_subcommand("train", "train the model");
  cmd_train->add_option("--data", train_opt.data)->required();
  cmd_train->add_option("--val", train_opt.val);
  cmd_train->add_option("--test", train_opt.test);
  cmd_train->add_option("--out", train_opt.out_dir)->required();
  cmd_train->add_option("--model-config", train_opt.model_config_path);
  cmd_train->add_option("--train-config", train_opt.train_config_path);
  cmd_train->add_option("--seeds", train_opt.seeds, "comma-separated");
  cmd_train->add_option("--epochs", train_opt.epochs);
  cmd_train->add_option("--samples", train_opt.samples);
  cmd_train->add_option("--patience", train_opt.patience);
  cmd_train->add_option("--lr", train_opt.lr);
  cmd_train->add_option("--jobs", train_opt.jobs);
  cmd_train->add_option("--readout", train_opt.readout, "nalu|mlp");

  std::string pr_ckpt, pr_in, pr_out;
  auto* cmd_predict = app.add_subcommand("predict", "predict latencies from a checkpoint");
  cmd_predict->add_option("--ckpt", pr_ckpt)->required();
  cmd_predict->add_option("--in", pr_in)->required();
  cmd_predict->add_option("--out", pr_out)->required();

  std::vector<std::string> ev_ckpts;
  std::string ev_data, ev_buckets, ev_out, ev_config;
  auto* cmd_eval = app.add_subcommand("evaluate", "size-bucketed MAPE and timing");
  cmd_eval->add_option("--ckpt", ev_ckpts)->required();
  cmd_eval->add_option("--data", ev_data)->required();
  cmd_eval->add_option("--buckets", ev_buckets, "comma-separated edges");
  cmd_eval->add_option("--out", ev_out)->required();
  cmd_eval->add_option("--model-config", ev_config, "verify checkpoint against this config");

  std::string ab_data, ab_val, ab_test, ab_out, ab_seeds;
  int ab_epochs = -1, ab_samples = -1, ab_jobs = 0;
  auto* cmd_ablate = app.add_subcommand("ablate", "NALU vs MLP readout comparison");
  cmd_ablate->add_option("--data", ab_data)->required();
  cmd_ablate->add_option("--val", ab_val);
  cmd_ablate->add_option("--test", ab_test);
  cmd_ablate->add_option("--out", ab_out)->required();
  cmd_ablate->add_option("--seeds", ab_seeds);
  cmd_ablate->add_option("--epochs", ab_epochs);
  cmd_ablate->add_option("--samples", ab_samples);
  cmd_ablate->add_option("--jobs", ab_jobs);

  std::string rp_in, rp_out;
  auto* cmd_report = app.add_subcommand("report", "render size curves and ablation tables");
  cmd_report->add_option("--in", rp_in)->required();
  cmd_report->add_option("--out", rp_out)->required();

  std::string mp_pred, mp_truth;
  auto* cmd_mape = app.add_subcommand("mape", "MAPE of a prediction file against ground truth");
  cmd_mape->add_option("--pred", mp_pred)->required();
  cmd_mape->add_option("--truth", mp_truth)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_gen->parsed()) return run_gen(gen);
    if (cmd_transform->parsed()) return run_transform(tr_in, tr_out, tr_roles, tr_dump);
    if (cmd_train->parsed()) return run_train(train_opt);
    if (cmd_predict->parsed()) return run_predict(pr_ckpt, pr_in, pr_out);
    if (cmd_eval->parsed()) return run_evaluate(ev_ckpts, ev_data, ev_buckets, ev_out, ev_config);
    if (cmd_ablate->parsed()) {
      return run_ablate(ab_data, ab_val, ab_test, ab_out, ab_seeds, ab_epochs, ab_samples, ab_jobs);
    }
    if (cmd_report->parsed()) return run_report(rp_in, rp_out);
    if (cmd_mape->parsed()) return run_mape(mp_pred, mp_truth);
  } catch (const ConfigMismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}

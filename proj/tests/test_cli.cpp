#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "netlat/netmodel.hpp"
#include "netlat/trainer.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace netlat;

namespace {

struct CommandResult {
  int exit_code;
  std::string output;
};

CommandResult run(const std::string& args) {
  const std::string out_file = (fs::temp_directory_path() / "netlat_cli_out.txt").string();
  const std::string cmd = std::string(NETLAT_BIN) + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(out_file);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return {WEXITSTATUS(status), buffer.str()};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("gen: tiny fixture, determinism, and manifest") {
  const auto dir = fresh_dir("netlat_cli_gen");
  const std::string out = (dir / "tiny.jsonl").string();
  const auto result = run("gen --n-min 3 --n-max 3 --count 1 --degree 2 --seed 5 --out " + out);
  CHECK(result.exit_code == 0);
  const auto set = load_dataset_file(out);
  REQUIRE(set.size() == 1);
  CHECK(set[0].topology.n == 3);
  REQUIRE(set[0].performance.has_value());
  CHECK(fs::exists(dir / "manifest.json"));

  const std::string bytes_first = read_file(out);
  run("gen --n-min 3 --n-max 3 --count 1 --degree 2 --seed 5 --out " + out);
  CHECK(read_file(out) == bytes_first);  // same seed, byte-identical dataset
}

TEST_CASE("gen: infeasible degree exits with the validation code") {
  const auto dir = fresh_dir("netlat_cli_gen_bad");
  const auto result =
      run("gen --degree 50 --n-min 10 --n-max 10 --count 1 --out " + (dir / "x.jsonl").string());
  CHECK(result.exit_code == 2);
}

TEST_CASE("transform: path fixture counts and idempotent dumps") {
  const auto dir = fresh_dir("netlat_cli_transform");
  // 3-node path with one OD pair
  NetworkSnapshot s = testutil::path_snapshot(10000.0, 10000.0);
  s.traffic.pairs = {{0, 2, 5.0, 6.0}};
  s.performance = oracle::ground_truth(s);
  const std::string data = (dir / "data.jsonl").string();
  save_dataset_file({s}, data);

  const std::string out = (dir / "summary.jsonl").string();
  const std::string dump = (dir / "dump.jsonl").string();
  const auto result =
      run("transform --in " + data + " --out " + out + " --n-roles 3 --dump " + dump);
  CHECK(result.exit_code == 0);

  const auto summary = json::parse(read_file(out));
  CHECK(summary.at("lnodes") == 4);
  CHECK(summary.at("ledges") == 2);

  const auto dumped = json::parse(read_file(dump));
  CHECK(dumped.at("lnodes").size() == 4);
  CHECK(dumped.at("ledges").size() == 2);
  CHECK(dumped.at("features").size() == 4);
  CHECK(dumped.at("trajectories").size() == 1);
  CHECK(dumped.at("roles").size() == 4);

  const std::string first = read_file(dump);
  run("transform --in " + data + " --out " + out + " --n-roles 3 --dump " + dump);
  CHECK(read_file(dump) == first);
}

TEST_CASE("transform: missing input exits 2 and names the path") {
  const auto result = run("transform --in /nonexistent/input.jsonl --out /tmp/x.jsonl");
  CHECK(result.exit_code == 2);
  CHECK(result.output.find("/nonexistent/input.jsonl") != std::string::npos);
}

TEST_CASE("pipeline: gen, train, predict, evaluate, mape, report") {
  const auto dir = fresh_dir("netlat_cli_pipeline");
  const std::string train_data = (dir / "train.jsonl").string();
  const std::string test_data = (dir / "test.jsonl").string();
  CHECK(run("gen --n-min 6 --n-max 9 --degree 3 --count 12 --seed 11 --out " + train_data)
            .exit_code == 0);
  CHECK(run("gen --n-min 6 --n-max 9 --degree 3 --count 3 --seed 12 --out " + test_data)
            .exit_code == 0);

  const std::string run_dir = (dir / "run").string();
  const auto train_result =
      run("train --data " + train_data + " --test " + test_data + " --out " + run_dir +
          " --seeds 1 --epochs 2 --samples 6 --jobs 1");
  CHECK(train_result.exit_code == 0);
  const std::string ckpt = run_dir + "/ckpt_seed1.json";
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(run_dir + "/report.json"));
  CHECK(fs::exists(run_dir + "/report.csv"));
  CHECK(fs::exists(run_dir + "/manifest.json"));

  // predict must accept snapshots without ground truth
  auto stripped = load_dataset_file(test_data);
  for (auto& s : stripped) s.performance.reset();
  const std::string bare = (dir / "bare.jsonl").string();
  save_dataset_file(stripped, bare);
  const std::string pred = (dir / "pred.jsonl").string();
  CHECK(run("predict --ckpt " + ckpt + " --in " + bare + " --out " + pred).exit_code == 0);
  std::ifstream pf(pred);
  std::string line;
  int lines = 0;
  while (std::getline(pf, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    CHECK(j.at("path_latency_pred").size() > 0);
    ++lines;
  }
  CHECK(lines == 3);

  // predict piped through mape equals evaluate's overall figure
  const auto mape_result = run("mape --pred " + pred + " --truth " + test_data);
  CHECK(mape_result.exit_code == 0);
  const double piped = std::stod(mape_result.output);

  const std::string eval_dir = (dir / "eval").string();
  const auto eval_result =
      run("evaluate --ckpt " + ckpt + " --data " + test_data + " --out " + eval_dir);
  CHECK(eval_result.exit_code == 0);
  const auto eval_json = json::parse(read_file(eval_dir + "/eval.json"));
  const double evaluated = eval_json.at(0).at("overall_mape").get<double>();
  CHECK(piped == doctest::Approx(evaluated).epsilon(1e-6));

  // mismatched config hash must exit 3
  const std::string other_cfg = (dir / "other_config.json").string();
  {
    std::ofstream f(other_cfg);
    f << R"({"embed_dim": 16})";
  }
  const auto mismatch = run("evaluate --ckpt " + ckpt + " --data " + test_data + " --out " +
                            eval_dir + " --model-config " + other_cfg);
  CHECK(mismatch.exit_code == 3);

  // report renders csv + svg from the train report
  const std::string report_dir = (dir / "report").string();
  const auto report_result =
      run("report --in " + run_dir + "/report.json --out " + report_dir);
  CHECK(report_result.exit_code == 0);
  CHECK(fs::exists(report_dir + "/size_curve.csv"));
  const std::string svg = read_file(report_dir + "/size_curve.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
}

TEST_CASE("ablate and report render the comparison artifacts") {
  const auto dir = fresh_dir("netlat_cli_ablate");
  const std::string data = (dir / "data.jsonl").string();
  CHECK(run("gen --n-min 6 --n-max 8 --degree 3 --count 10 --seed 21 --out " + data).exit_code ==
        0);
  const std::string test_data = (dir / "test.jsonl").string();
  CHECK(run("gen --n-min 6 --n-max 8 --degree 3 --count 3 --seed 22 --out " + test_data)
            .exit_code == 0);

  const std::string ab_dir = (dir / "ablation").string();
  const auto ablate_result = run("ablate --data " + data + " --test " + test_data + " --out " +
                                 ab_dir + " --seeds 1 --epochs 2 --samples 4 --jobs 1");
  CHECK(ablate_result.exit_code == 0);
  CHECK(fs::exists(ab_dir + "/ablation.json"));
  CHECK(fs::exists(ab_dir + "/ablation.csv"));

  const std::string report_dir = (dir / "figures").string();
  CHECK(run("report --in " + ab_dir + "/ablation.json --out " + report_dir).exit_code == 0);
  CHECK(fs::exists(report_dir + "/size_curve.csv"));
  CHECK(fs::exists(report_dir + "/size_curve.svg"));
  CHECK(fs::exists(report_dir + "/ablation.csv"));
  CHECK(fs::exists(report_dir + "/ablation.svg"));
  // both configurations appear in the rendered table
  const std::string csv = read_file(report_dir + "/ablation.csv");
  CHECK(csv.find("nalu") != std::string::npos);
  CHECK(csv.find("mlp") != std::string::npos);
}

TEST_CASE("env var seed is honored") {
  const auto dir = fresh_dir("netlat_cli_env");
  const std::string out_a = (dir / "a.jsonl").string();
  const std::string out_b = (dir / "b.jsonl").string();
  const std::string flags = " gen --n-min 4 --n-max 4 --degree 2.1 --count 1 --out ";
  const std::string env_cmd =
      "env NETLAT_SEED=99 " + std::string(NETLAT_BIN) + flags + out_a + " >/dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(env_cmd.c_str())) == 0);
  CHECK(run("gen --n-min 4 --n-max 4 --degree 2.1 --count 1 --seed 99 --out " + out_b).exit_code ==
        0);
  CHECK(read_file(out_a) == read_file(out_b));
}

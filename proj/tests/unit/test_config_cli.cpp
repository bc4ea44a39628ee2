#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fedat/checkpoint.hpp"
#include "fedat/cli.hpp"
#include "fedat/config.hpp"
#include "fedat/orchestrator.hpp"
#include "support/configs.hpp"

using namespace fedat;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fedat");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fedat_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_tiny_config(const fs::path& dir) {
  json doc = to_json(fedat::testing::tiny_config(21));
  const fs::path path = dir / "config.json";
  std::ofstream(path) << doc.dump(2);
  return path;
}

}  // namespace

TEST_CASE("config round-trips through JSON") {
  ExperimentConfig c = fedat::testing::tiny_config(3);
  c.schedule = ESchedule{50, 0.5, 5};
  c.eval.attack = AttackConfig{7, 0.1, 0.01, 0.0, 1.0, true};
  const ExperimentConfig back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
}

TEST_CASE("fractions are accepted for attack radii") {
  json doc = to_json(fedat::testing::tiny_config());
  doc["attack"]["epsilon"] = "8/255";
  doc["attack"]["alpha"] = "2/255";
  const ExperimentConfig c = config_from_json(doc);
  CHECK(c.attack.epsilon == 8.0 / 255.0);
  CHECK(c.attack.alpha == 2.0 / 255.0);
}

TEST_CASE("validation reports every problem in one pass") {
  json doc = to_json(fedat::testing::tiny_config());
  doc["rounds"] = 0;
  doc["attack"]["epsilon"] = -1;
  doc["optimizer"]["learning_rate"] = 0;
  doc["fusion"]["kind"] = "fedprox";
  doc["bogus"] = 1;
  std::vector<std::string> errors;
  CHECK_FALSE(parse_config(doc, errors).has_value());
  CHECK(errors.size() >= 5);
  auto mentions = [&](const std::string& needle) {
    for (const auto& e : errors)
      if (e.find(needle) != std::string::npos) return true;
    return false;
  };
  CHECK(mentions("rounds"));
  CHECK(mentions("epsilon"));
  CHECK(mentions("learning_rate"));
  CHECK(mentions("fusion.kind"));
  CHECK(mentions("bogus"));
}

TEST_CASE("non-divisible client counts are rejected for non-iid splits") {
  json doc = to_json(fedat::testing::tiny_config());
  doc["clients"] = 3;
  std::vector<std::string> errors;
  CHECK_FALSE(parse_config(doc, errors).has_value());
}

TEST_CASE("overrides reach nested keys and switch schedule forms") {
  json doc = to_json(fedat::testing::tiny_config());
  REQUIRE(doc["schedule"].contains("fixed_e"));
  apply_override(doc, "schedule.e0=50");
  apply_override(doc, "schedule.gamma_e=0.5");
  apply_override(doc, "schedule.freq_e=5");
  const ExperimentConfig c = config_from_json(doc);
  CHECK(c.schedule.e0 == 50);
  CHECK(c.schedule.gamma == 0.5);
  CHECK(c.schedule.freq == 5);
  CHECK(epochs_for_round(10, c.schedule) == 13);

  apply_override(doc, "schedule.fixed_e=20");
  CHECK(config_from_json(doc).schedule.is_fixed());

  apply_override(doc, "attack.epsilon=8/255");
  CHECK(config_from_json(doc).attack.epsilon == 8.0 / 255.0);
  apply_override(doc, "fusion.kind=fedcurv");
  CHECK(config_from_json(doc).fusion == FusionKind::fedcurv);
  CHECK_THROWS_AS(apply_override(doc, "novalue"), Error);
  CHECK_THROWS_AS(apply_override(doc, "a..b=1"), Error);
}

TEST_CASE("missing config file exits 2 and names the path") {
  const auto r = cli({"run", "--config", "/nonexistent/cfg.json", "--out", "/tmp/unused"});
  CHECK(r.code == 2);
  CHECK(r.err.find("/nonexistent/cfg.json") != std::string::npos);
  const json record = json::parse(r.err);
  CHECK(record.contains("error"));
}

TEST_CASE("invalid config exits 2 before any compute") {
  const fs::path dir = scratch("invalid");
  const fs::path cfg = write_tiny_config(dir);
  const auto r = cli({"run", "--config", cfg.string(), "--out", (dir / "out").string(), "--set", "rounds=0"});
  CHECK(r.code == 2);
  CHECK_FALSE(fs::exists(dir / "out"));
}

TEST_CASE("run writes metrics, summary and checkpoint, byte-identical across repeats and worker counts") {
  const fs::path dir = scratch("run");
  const fs::path cfg = write_tiny_config(dir);
  const auto a = cli({"run", "--config", cfg.string(), "--out", (dir / "a").string(), "--workers", "1",
                      "--set", "svcca.every=1"});
  const auto b = cli({"run", "--config", cfg.string(), "--out", (dir / "b").string(), "--workers", "3",
                      "--set", "svcca.every=1"});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  for (const char* f : {"metrics.jsonl", "summary.csv", "final.ckpt", "config.json"}) {
    CHECK(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  std::istringstream lines(slurp(dir / "a" / "metrics.jsonl"));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const json j = json::parse(line);
    for (const char* key : {"round", "e_t", "nat_acc", "adv_acc", "mean_loss", "svcca_l0"}) CHECK(j.contains(key));
    ++n;
  }
  CHECK(n == 3);
  CHECK(slurp(dir / "a" / "summary.csv").rfind("round,e_t,nat_acc,adv_acc,mean_loss", 0) == 0);
  CHECK_FALSE(fs::exists(dir / "a" / "metrics.jsonl.tmp"));
}

TEST_CASE("seed override changes the run") {
  const fs::path dir = scratch("seed");
  const fs::path cfg = write_tiny_config(dir);
  REQUIRE(cli({"run", "--config", cfg.string(), "--out", (dir / "a").string(), "--seed", "5"}).code == 0);
  REQUIRE(cli({"run", "--config", cfg.string(), "--out", (dir / "b").string(), "--seed", "6"}).code == 0);
  CHECK(slurp(dir / "a" / "final.ckpt") != slurp(dir / "b" / "final.ckpt"));
}

TEST_CASE("sweep over fixed_e writes one run per value and a comparison table") {
  const fs::path dir = scratch("sweep");
  const fs::path cfg = write_tiny_config(dir);
  const auto r = cli({"sweep", "--config", cfg.string(), "--out", (dir / "s").string(), "--axis", "schedule.fixed_e",
                      "--values", "1,5,20", "--set", "rounds=1"});
  REQUIRE(r.code == 0);
  for (const char* v : {"1", "5", "20"}) CHECK(fs::exists(dir / "s" / (std::string("schedule.fixed_e=") + v) / "metrics.jsonl"));
  const std::string table = slurp(dir / "s" / "comparison.csv");
  CHECK(table.rfind("value,final_nat_acc,final_adv_acc,status\n", 0) == 0);
  CHECK(std::count(table.begin(), table.end(), '\n') == 4);
}

TEST_CASE("lambda sweep: the zero row matches a fedavg run") {
  const fs::path dir = scratch("lambda");
  const fs::path cfg = write_tiny_config(dir);
  REQUIRE(cli({"sweep", "--config", cfg.string(), "--out", (dir / "s").string(), "--axis", "fusion.lambda",
               "--values", "[0, 0.01, 1]", "--set", "fusion.kind=fedcurv"})
              .code == 0);
  REQUIRE(cli({"run", "--config", cfg.string(), "--out", (dir / "avg").string()}).code == 0);
  const auto zero = read_checkpoint(dir / "s" / "fusion.lambda=0" / "final.ckpt");
  const auto avg = read_checkpoint(dir / "avg" / "final.ckpt");
  CHECK((zero.values - avg.values).cwiseAbs().maxCoeff() <= 1e-12);
  const auto one = read_checkpoint(dir / "s" / "fusion.lambda=1" / "final.ckpt");
  CHECK(one.values != avg.values);
}

TEST_CASE("empty sweep values are a validation error") {
  const fs::path dir = scratch("empty_sweep");
  const fs::path cfg = write_tiny_config(dir);
  const auto r = cli({"sweep", "--config", cfg.string(), "--out", (dir / "s").string(), "--axis", "fusion.lambda",
                      "--values", "[]"});
  CHECK(r.code == 2);
  CHECK_FALSE(fs::exists(dir / "s"));
}

TEST_CASE("interpolate and svcca on identical checkpoints") {
  const fs::path dir = scratch("compare");
  const fs::path cfg = write_tiny_config(dir);
  REQUIRE(cli({"run", "--config", cfg.string(), "--out", (dir / "run").string()}).code == 0);
  const std::string ck = (dir / "run" / "final.ckpt").string();

  const auto ri = cli({"interpolate", "--ckpt1", ck, "--ckpt2", ck, "--config", cfg.string(), "--out",
                       (dir / "interp").string()});
  REQUIRE(ri.code == 0);
  std::istringstream rows(slurp(dir / "interp" / "interpolation.csv"));
  std::string line;
  std::getline(rows, line);
  CHECK(line == "w,nat_loss,adv_loss");
  std::vector<std::string> ws;
  std::set<std::string> losses;
  while (std::getline(rows, line)) {
    ws.push_back(line.substr(0, line.find(',')));
    losses.insert(line.substr(line.find(',')));
  }
  CHECK(ws.size() == 29);
  CHECK(ws.front() == "-0.2");
  CHECK(std::stod(ws[1]) == default_interpolation_grid()[1]);
  CHECK(ws.back() == "1.2");
  CHECK(losses.size() == 1);

  // Probe CSV from the test split.
  const auto [train, test] = load_datasets(config_from_json(load_config_file(cfg.string())));
  {
    std::ofstream probe(dir / "probe.csv");
    for (int j = 0; j < test.inputs.cols(); ++j) probe << "x" << j << ",";
    probe << "label\n";
    for (Eigen::Index i = 0; i < test.size(); ++i) {
      for (int j = 0; j < test.inputs.cols(); ++j) probe << test.inputs(i, j) << ",";
      probe << test.labels[static_cast<std::size_t>(i)] << "\n";
    }
  }
  const auto rs = cli({"svcca", "--ckpt1", ck, "--ckpt2", ck, "--probe", (dir / "probe.csv").string(), "--out",
                       (dir / "svcca").string()});
  REQUIRE(rs.code == 0);
  std::istringstream srows(slurp(dir / "svcca" / "svcca.csv"));
  std::getline(srows, line);
  CHECK(line == "layer,score,kept_a,kept_b,degenerate");
  int n = 0;
  while (std::getline(srows, line)) {
    std::stringstream cells(line);
    std::string layer, score;
    std::getline(cells, layer, ',');
    std::getline(cells, score, ',');
    CHECK(std::stod(score) == doctest::Approx(1.0).epsilon(1e-6));
    ++n;
  }
  CHECK(n == 2);
}

TEST_CASE("mismatched checkpoints are refused") {
  const fs::path dir = scratch("mismatch");
  write_checkpoint(dir / "a.ckpt", Checkpoint{ModelSpec{{2, 3}, Activation::relu, 0}, ParamVector::Zero(9), "params"});
  write_checkpoint(dir / "b.ckpt", Checkpoint{ModelSpec{{2, 4}, Activation::relu, 0}, ParamVector::Zero(12), "params"});
  std::ofstream(dir / "p.csv") << "a,b,label\n0.1,0.2,0\n";
  const auto r = cli({"svcca", "--ckpt1", (dir / "a.ckpt").string(), "--ckpt2", (dir / "b.ckpt").string(), "--probe",
                      (dir / "p.csv").string(), "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("different models") != std::string::npos);
}

TEST_CASE("report summarizes a metrics stream") {
  const fs::path dir = scratch("report");
  const fs::path cfg = write_tiny_config(dir);
  REQUIRE(cli({"run", "--config", cfg.string(), "--out", (dir / "run").string()}).code == 0);
  const auto r = cli({"report", "--metrics", (dir / "run" / "metrics.jsonl").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out == slurp(dir / "run" / "summary.csv"));
}

TEST_CASE("help and unknown subcommands") {
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({}).code == 2);
}

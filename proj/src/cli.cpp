#include "fedat/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "fedat/checkpoint.hpp"
#include "fedat/orchestrator.hpp"

namespace fedat {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Validation, usage and IO problems; exit code 2.
struct UsageError : Error {
  using Error::Error;
};

struct CommonArgs {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
};

fs::path output_dir(const std::string& requested, const std::string& command) {
  if (!requested.empty()) return requested;
  const char* root = std::getenv("FEDAT_OUT_ROOT");
  return fs::path(root && *root ? root : "runs") / command;
}

// Shortest text that parses back to the same double.
std::string fmt_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_real(*v) : ""; }

json resolve_config_doc(const CommonArgs& args) {
  json doc;
  try {
    doc = load_config_file(args.config);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  try {
    for (const auto& o : args.overrides) apply_override(doc, o);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (args.seed) doc["seed"] = *args.seed;
  return doc;
}

ExperimentConfig validated(const json& doc) {
  std::vector<std::string> errors;
  auto config = parse_config(doc, errors);
  if (!config) {
    std::ostringstream os;
    for (std::size_t i = 0; i < errors.size(); ++i) os << (i ? "; " : "") << errors[i];
    throw UsageError("invalid config: " + os.str());
  }
  return *config;
}

std::string summary_csv(const std::vector<RoundReport>& reports) {
  std::vector<int> layers;
  for (const auto& r : reports)
    if (!r.svcca_layers.empty()) layers = r.svcca_layers;
  std::ostringstream os;
  os << "round,e_t,nat_acc,adv_acc,mean_loss";
  for (int l : layers) os << ",svcca_l" << l;
  os << "\n";
  for (const auto& r : reports) {
    os << r.round << "," << r.epochs << "," << fmt_opt(r.natural_accuracy) << "," << fmt_opt(r.adversarial_accuracy)
       << "," << fmt_real(r.mean_loss);
    for (std::size_t i = 0; i < layers.size(); ++i)
      os << "," << (i < r.svcca_pair01.size() ? fmt_real(r.svcca_pair01[i]) : "");
    os << "\n";
  }
  return os.str();
}

/// Runs one experiment into `dir`; metrics.jsonl is rewritten atomically after
/// every round so a failure leaves the completed rounds on disk.
ExperimentResult execute(const ExperimentConfig& config, const fs::path& dir, int workers) {
  fs::create_directories(dir);
  write_file_atomic(dir / "config.json", to_json(config).dump(2) + "\n");
  std::string metrics;
  std::vector<RoundReport> seen;
  RunOptions opts;
  opts.workers = workers;
  opts.checkpoint_dir = dir;
  opts.sink = [&](const RoundReport& r) {
    metrics += to_json(r).dump() + "\n";
    seen.push_back(r);
    write_file_atomic(dir / "metrics.jsonl", metrics);
  };
  try {
    ExperimentResult result = run_experiment(config, opts);
    write_file_atomic(dir / "summary.csv", summary_csv(result.reports));
    return result;
  } catch (...) {
    if (!seen.empty()) write_file_atomic(dir / "summary.csv", summary_csv(seen));
    throw;
  }
}

int cmd_run(const CommonArgs& args, std::ostream& out) {
  const ExperimentConfig config = validated(resolve_config_doc(args));
  const fs::path dir = output_dir(args.out, "run");
  const ExperimentResult result = execute(config, dir, args.workers);
  const auto& last = result.reports.back();
  out << "rounds=" << result.reports.size() << " nat_acc=" << fmt_opt(last.natural_accuracy)
      << " adv_acc=" << fmt_opt(last.adversarial_accuracy) << " out=" << dir.string() << "\n";
  return 0;
}

std::vector<std::string> split_values(const std::string& text) {
  std::vector<std::string> values;
  json list = json::parse(text, nullptr, false);
  if (!list.is_discarded() && list.is_array()) {
    for (const auto& v : list) values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    return values;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) values.push_back(item);
  return values;
}

int cmd_sweep(const CommonArgs& args, const std::string& axis, const std::string& values_text, std::ostream& out,
              std::ostream& err) {
  const std::vector<std::string> values = split_values(values_text);
  if (axis.empty()) throw UsageError("sweep needs --axis");
  if (values.empty()) throw UsageError("sweep needs a non-empty --values list");

  // Validate every variant before running any of them.
  const json base = resolve_config_doc(args);
  std::vector<ExperimentConfig> configs;
  std::vector<std::string> problems;
  for (const auto& v : values) {
    json doc = base;
    try {
      apply_override(doc, axis + "=" + v);
      configs.push_back(validated(doc));
    } catch (const Error& e) {
      problems.push_back(axis + "=" + v + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    std::ostringstream os;
    for (std::size_t i = 0; i < problems.size(); ++i) os << (i ? " | " : "") << problems[i];
    throw UsageError(os.str());
  }

  const fs::path dir = output_dir(args.out, "sweep");
  std::ostringstream table;
  table << "value,final_nat_acc,final_adv_acc,status\n";
  int failures = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const fs::path sub = dir / (axis + "=" + values[i]);
    try {
      const ExperimentResult result = execute(configs[i], sub, args.workers);
      const auto& last = result.reports.back();
      table << values[i] << "," << fmt_opt(last.natural_accuracy) << "," << fmt_opt(last.adversarial_accuracy)
            << ",ok\n";
    } catch (const std::exception& e) {
      ++failures;
      table << values[i] << ",,,failed\n";
      err << json{{"error", e.what()}, {"command", "sweep"}, {"value", values[i]}}.dump() << "\n";
    }
  }
  write_file_atomic(dir / "comparison.csv", table.str());
  out << "runs=" << values.size() << " failed=" << failures << " out=" << dir.string() << "\n";
  return failures ? 1 : 0;
}

Checkpoint load_ckpt(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path);
  return read_checkpoint(path);
}

std::vector<double> parse_grid(const std::string& text) {
  if (text.empty()) return default_interpolation_grid();
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(parse_fraction(item));
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0])
    throw UsageError("--grid must be start:stop:step with step > 0");
  const auto n = static_cast<int>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
  std::vector<double> grid;
  for (int i = 0; i <= n; ++i) grid.push_back(parts[0] + i * parts[2]);
  return grid;
}

int cmd_interpolate(const CommonArgs& args, const std::string& ckpt1, const std::string& ckpt2,
                    const std::string& data_csv, bool rescale, const std::string& grid_text, bool natural_only,
                    std::ostream& out) {
  const Checkpoint a = load_ckpt(ckpt1);
  const Checkpoint b = load_ckpt(ckpt2);
  if (!(a.spec.layer_sizes == b.spec.layer_sizes && a.spec.activation == b.spec.activation))
    throw UsageError("checkpoints describe different models");
  const std::vector<double> grid = parse_grid(grid_text);

  AttackConfig attack;
  std::uint64_t seed = 0;
  Dataset data;
  if (!args.config.empty()) {
    const ExperimentConfig config = validated(resolve_config_doc(args));
    attack = config.eval_attack();
    seed = config.seed;
    if (data_csv.empty()) data = load_datasets(config).first;
  }
  if (!data_csv.empty()) data = load_csv(data_csv, rescale);
  if (data.size() == 0) throw UsageError("interpolate needs --data CSV or --config to supply a dataset");
  if (data.inputs.cols() != a.spec.input_dim()) throw UsageError("dataset width does not match the checkpoints");

  const auto sweep = loss_sweep(a.values, b.values, a.spec, data.all(), natural_only ? nullptr : &attack, grid, seed);
  std::ostringstream csv;
  csv << "w,nat_loss,adv_loss\n";
  for (const auto& p : sweep) csv << fmt_real(p.w) << "," << fmt_real(p.natural_loss) << "," << fmt_opt(p.adversarial_loss) << "\n";
  const fs::path dir = output_dir(args.out, "interpolate");
  write_file_atomic(dir / "interpolation.csv", csv.str());
  out << "points=" << sweep.size() << " out=" << (dir / "interpolation.csv").string() << "\n";
  return 0;
}

int cmd_svcca(const CommonArgs& args, const std::string& ckpt1, const std::string& ckpt2, const std::string& probe_csv,
              bool rescale, std::vector<int> layers, double variance_keep, std::ostream& out) {
  const Checkpoint a = load_ckpt(ckpt1);
  const Checkpoint b = load_ckpt(ckpt2);
  if (!(a.spec.layer_sizes == b.spec.layer_sizes && a.spec.activation == b.spec.activation))
    throw UsageError("checkpoints describe different models");
  if (!fs::exists(probe_csv)) throw UsageError("probe CSV not found: " + probe_csv);
  const Dataset probe = load_csv(probe_csv, rescale);
  if (probe.inputs.cols() != a.spec.input_dim()) throw UsageError("probe width does not match the checkpoints");
  if (layers.empty())
    for (int l = 0; l < a.spec.depth(); ++l) layers.push_back(l);

  std::ostringstream csv;
  csv << "layer,score,kept_a,kept_b,degenerate\n";
  for (int l : layers) {
    const auto ma = layer_activations(a.values, a.spec, probe.inputs, l);
    const auto mb = layer_activations(b.values, b.spec, probe.inputs, l);
    const SvccaResult r = svcca_score(ma.values, mb.values, variance_keep);
    csv << l << "," << fmt_real(r.score) << "," << r.kept_a << "," << r.kept_b << "," << (r.degenerate ? 1 : 0) << "\n";
  }
  const fs::path dir = output_dir(args.out, "svcca");
  write_file_atomic(dir / "svcca.csv", csv.str());
  out << "layers=" << layers.size() << " out=" << (dir / "svcca.csv").string() << "\n";
  return 0;
}

int cmd_report(const std::string& metrics_path, const std::string& out_path, std::ostream& out) {
  std::ifstream in(metrics_path);
  if (!in) throw UsageError("metrics file not found: " + metrics_path);
  std::vector<RoundReport> reports;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw UsageError("malformed metrics line in " + metrics_path);
    RoundReport r;
    r.round = j.value("round", 0);
    r.epochs = j.value("e_t", 0);
    if (j.contains("nat_acc") && !j["nat_acc"].is_null()) r.natural_accuracy = j["nat_acc"].get<double>();
    if (j.contains("adv_acc") && !j["adv_acc"].is_null()) r.adversarial_accuracy = j["adv_acc"].get<double>();
    r.mean_loss = j.value("mean_loss", 0.0);
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key().rfind("svcca_l", 0) == 0) {
        r.svcca_layers.push_back(std::stoi(it.key().substr(7)));
        r.svcca_pair01.push_back(it.value().get<double>());
      }
    }
    reports.push_back(std::move(r));
  }
  const std::string csv = summary_csv(reports);
  if (!out_path.empty())
    write_file_atomic(out_path, csv);
  else
    out << csv;
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated adversarial training simulator"};
  app.require_subcommand(1);
  app.footer("Default output root: $FEDAT_OUT_ROOT/<command> (falls back to ./runs/<command>).");

  CommonArgs common;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", common.config, "Experiment config (JSON)");
    if (config_required) opt->required();
    sub->add_option("--out", common.out, "Output directory");
    sub->add_option("--set", common.overrides, "Override dotted.key=value (repeatable)");
    sub->add_option("--seed", common.seed, "Master seed override");
    sub->add_option("--workers", common.workers, "Client worker threads")->check(CLI::PositiveNumber);
  };

  auto* run = app.add_subcommand("run", "Run one federated experiment");
  add_common(run, true);

  auto* sweep = app.add_subcommand("sweep", "Run one experiment per value of a config key");
  add_common(sweep, true);
  std::string axis;
  std::string values;
  sweep->add_option("--axis", axis, "Dotted config key to vary")->required();
  sweep->add_option("--values", values, "Comma-separated values or a JSON list")->required();

  auto* interp = app.add_subcommand("interpolate", "Loss along w*theta1 + (1-w)*theta2");
  add_common(interp, false);
  std::string ckpt1;
  std::string ckpt2;
  std::string data_csv;
  std::string grid;
  bool rescale = false;
  bool natural_only = false;
  interp->add_option("--ckpt1", ckpt1, "First checkpoint")->required();
  interp->add_option("--ckpt2", ckpt2, "Second checkpoint")->required();
  interp->add_option("--data", data_csv, "Dataset CSV (defaults to the config's training set)");
  interp->add_option("--grid", grid, "start:stop:step (default -0.2:1.2:0.05)");
  interp->add_flag("--rescale", rescale, "Min-max rescale CSV features");
  interp->add_flag("--natural-only", natural_only, "Skip the adversarial loss column");

  auto* svcca = app.add_subcommand("svcca", "Per-layer SVCCA similarity of two checkpoints");
  add_common(svcca, false);
  std::string probe;
  std::vector<int> layers;
  double keep = 0.99;
  svcca->add_option("--ckpt1", ckpt1, "First checkpoint")->required();
  svcca->add_option("--ckpt2", ckpt2, "Second checkpoint")->required();
  svcca->add_option("--probe", probe, "Probe inputs CSV")->required();
  svcca->add_option("--layers", layers, "Layer indices (default: all)");
  svcca->add_option("--variance-keep", keep, "Spectrum fraction kept before CCA");
  svcca->add_flag("--rescale", rescale, "Min-max rescale CSV features");

  auto* report = app.add_subcommand("report", "Summarize a metrics.jsonl file as CSV");
  std::string metrics;
  std::string report_out;
  report->add_option("--metrics", metrics, "metrics.jsonl from a run")->required();
  report->add_option("--out", report_out, "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << json{{"error", e.what()}, {"kind", "usage"}}.dump() << "\n";
    return 2;
  }

  try {
    if (run->parsed()) return cmd_run(common, out);
    if (sweep->parsed()) return cmd_sweep(common, axis, values, out, err);
    if (interp->parsed()) return cmd_interpolate(common, ckpt1, ckpt2, data_csv, rescale, grid, natural_only, out);
    if (svcca->parsed()) return cmd_svcca(common, ckpt1, ckpt2, probe, rescale, layers, keep, out);
    if (report->parsed()) return cmd_report(metrics, report_out, out);
  } catch (const UsageError& e) {
    err << json{{"error", e.what()}, {"kind", "usage"}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << json{{"error", e.what()}, {"kind", "runtime"}}.dump() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace fedat

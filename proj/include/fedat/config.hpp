#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedat/adversary.hpp"
#include "fedat/data.hpp"
#include "fedat/nn.hpp"
#include "fedat/optim.hpp"
#include "fedat/schedule.hpp"

namespace fedat {

enum class FusionKind { fedavg, fedcurv };

/// What to report as adversarial accuracy for naturally trained runs.
enum class NaturalAdvPolicy { absent, zero, measured };

struct DataConfig {
  std::string source = "synthetic";  // "synthetic" or "csv"
  SyntheticSpec synthetic;
  int test_per_class = 50;
  std::string csv_train;
  std::string csv_test;
  bool rescale = false;
};

struct EvalConfig {
  int every = 1;  // 0 evaluates only after the last round
  bool adversarial = true;
  std::optional<AttackConfig> attack;  // defaults to the training attack
  NaturalAdvPolicy natural_adv = NaturalAdvPolicy::absent;
};

struct SvccaConfig {
  int every = 0;  // 0 disables drift tracking
  std::vector<int> layers;  // empty means every layer
  double variance_keep = 0.99;
  int probe_size = 200;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  int rounds = 10;
  int clients = 5;
  bool natural_training = false;
  ModelSpec model{{10, 32, 10}, Activation::relu, 0};
  DataConfig data;
  bool non_iid = true;
  double skew = 2.0;
  AttackConfig attack;
  OptimizerConfig optimizer;
  FusionKind fusion = FusionKind::fedavg;
  double lambda = 0.0;
  ESchedule schedule = ESchedule::fixed(1);
  EvalConfig eval;
  SvccaConfig svcca;
  int checkpoint_every = 0;

  AttackConfig eval_attack() const { return eval.attack.value_or(attack); }
};

/// Parses a config document, collecting every problem instead of stopping at
/// the first. Returns nullopt when `errors` is non-empty.
std::optional<ExperimentConfig> parse_config(const nlohmann::json& doc, std::vector<std::string>& errors);

/// Throws Error listing every problem.
ExperimentConfig config_from_json(const nlohmann::json& doc);

/// Canonical JSON for a config; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const ExperimentConfig& config);

/// Applies "dotted.key=value". The value is read as JSON when it parses,
/// otherwise as a string. Setting schedule.fixed_e clears the decaying
/// fields and vice versa.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads a JSON config file. Throws Error naming the path when missing.
nlohmann::json load_config_file(const std::string& path);

std::string to_string(FusionKind k);

}  // namespace fedat

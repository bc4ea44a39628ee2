#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedat/config.hpp"
#include "fedat/fusion.hpp"
#include "fedat/svcca.hpp"

namespace fedat {

/// One client's view of the federation: its fixed shard and optimizer state.
struct ClientState {
  int id = 0;
  std::vector<int> shard;  // indices into the training set
  OptimizerState optimizer;
};

/// Inputs for one client's local training in one round.
struct LocalTrainArgs {
  const Dataset* train = nullptr;
  const ModelSpec* spec = nullptr;
  const OptimizerConfig* optimizer = nullptr;
  const AttackConfig* attack = nullptr;  // null means natural training
  const CurvContext* curv = nullptr;     // null means no penalty
  int epochs = 1;
  int round = 0;
  std::uint64_t master_seed = 0;
};

struct LocalTrainResult {
  ParamVector params;
  double last_epoch_loss = 0.0;  // mean minibatch loss of the final epoch
};

/// Runs `epochs` passes over the client's shard starting from `global`. Each
/// epoch shuffles with a seed derived from (master, client, round, epoch).
/// Per minibatch: PGD at the current local params (unless natural), loss
/// gradient on that batch, plus lambda * penalty gradient, one optimizer step.
LocalTrainResult local_adversarial_train(ClientState& client, const ParamVector& global, const LocalTrainArgs& args);

/// Batch order for one epoch; shared by training and by test oracles.
std::vector<int> epoch_order(const std::vector<int>& shard, std::uint64_t master_seed, int client, int round,
                             int epoch);

struct Evaluation {
  double natural_accuracy = 0.0;
  std::optional<double> adversarial_accuracy;
};

Evaluation evaluate(const ParamVector& params, const ModelSpec& spec, const Batch& testset,
                    const AttackConfig* attack, std::uint64_t seed = 0);

struct RoundReport {
  int round = 0;
  int epochs = 0;
  std::optional<double> natural_accuracy;
  std::optional<double> adversarial_accuracy;
  std::vector<double> client_losses;
  double mean_loss = 0.0;
  std::vector<int> svcca_layers;
  std::vector<double> svcca_pair01;  // clients 0 and 1, per layer
  std::vector<double> svcca_mean;    // all pairs, per layer
  double wall_seconds = 0.0;
};

/// Deterministic record; wall time is left out so identical runs produce
/// identical bytes.
nlohmann::json to_json(const RoundReport& report);

/// Owns data, clients and global weights for one experiment.
class Simulation {
 public:
  explicit Simulation(ExperimentConfig config, int workers = 1);

  /// Runs round `next_round()`: broadcast, local training on every client,
  /// fusion, evaluation. Advances the global weights.
  RoundReport run_round();

  int next_round() const { return round_; }
  const ParamVector& global() const { return global_; }
  const ExperimentConfig& config() const { return config_; }
  const Dataset& train_set() const { return train_; }
  const Dataset& test_set() const { return test_; }
  const std::vector<ClientState>& clients() const { return clients_; }
  /// Local models produced in the most recent round.
  const std::vector<ParamVector>& last_local_models() const { return local_models_; }

 private:
  ExperimentConfig config_;
  int workers_;
  Dataset train_;
  Dataset test_;
  Matrix probe_;
  std::vector<ClientState> clients_;
  ParamVector global_;
  std::vector<CurvAnchor> anchors_;  // previous round's FedCurv broadcast
  std::vector<ParamVector> local_models_;
  int round_ = 0;
};

using ReportSink = std::function<void(const RoundReport&)>;

struct ExperimentResult {
  std::vector<RoundReport> reports;
  ParamVector final_params;
  ModelSpec spec;
};

struct RunOptions {
  int workers = 1;
  ReportSink sink;
  /// When set, checkpoints land here: final.ckpt plus round_<t>.ckpt at the
  /// configured cadence.
  std::optional<std::filesystem::path> checkpoint_dir;
};

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// w * a + (1 - w) * b.
ParamVector interpolate_models(const ParamVector& a, const ParamVector& b, double w);

struct SweepPoint {
  double w = 0.0;
  double natural_loss = 0.0;
  std::optional<double> adversarial_loss;
};

/// 29 points from -0.2 to 1.2 in steps of 0.05.
std::vector<double> default_interpolation_grid();

std::vector<SweepPoint> loss_sweep(const ParamVector& a, const ParamVector& b, const ModelSpec& spec,
                                   const Batch& data, const AttackConfig* attack, const std::vector<double>& grid,
                                   std::uint64_t seed = 0);

/// Training and test sets for a config (synthetic or CSV).
std::pair<Dataset, Dataset> load_datasets(const ExperimentConfig& config);

}  // namespace fedat

#include "fedat/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <numeric>
#include <thread>

#include "fedat/checkpoint.hpp"
#include "fedat/rng.hpp"
#include "fedat/schedule.hpp"

namespace fedat {
namespace {

constexpr std::uint64_t kEvalStream = 0xe7a1;
constexpr std::uint64_t kProbeStream = 0x9be;

Batch gather_rows(const Dataset& data, const std::vector<int>& order, std::size_t begin, std::size_t end) {
  return data.gather(std::vector<int>(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                      order.begin() + static_cast<std::ptrdiff_t>(end)));
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// (by index) is rethrown after all tasks finish.
template <typename F>
void parallel_for(int n, int workers, F&& fn) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  auto guarded = [&](int i) {
    try {
      fn(i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  };
  const int threads = std::clamp(workers, 1, std::max(1, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) guarded(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (int i = next++; i < n; i = next++) guarded(i);
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

std::vector<int> epoch_order(const std::vector<int>& shard, std::uint64_t master_seed, int client, int round,
                             int epoch) {
  std::vector<int> order = shard;
  Rng rng(derive_seed(master_seed, {static_cast<std::uint64_t>(client), static_cast<std::uint64_t>(round),
                                    static_cast<std::uint64_t>(epoch)}));
  shuffle(order, rng);
  return order;
}

LocalTrainResult local_adversarial_train(ClientState& client, const ParamVector& global, const LocalTrainArgs& args) {
  if (!args.train || !args.spec || !args.optimizer) throw Error("local training is missing its inputs");
  if (args.epochs < 0) throw Error("local epochs must be non-negative");
  if (args.optimizer->reset_each_round) client.optimizer.reset();

  LocalTrainResult out{global, 0.0};
  if (args.epochs == 0 || client.shard.empty()) return out;

  const auto batch_size = static_cast<std::size_t>(args.optimizer->batch_size);
  try {
    for (int epoch = 0; epoch < args.epochs; ++epoch) {
      const auto order = epoch_order(client.shard, args.master_seed, client.id, args.round, epoch);
      Rng attack_rng(derive_seed(args.master_seed, {static_cast<std::uint64_t>(client.id),
                                                    static_cast<std::uint64_t>(args.round),
                                                    static_cast<std::uint64_t>(epoch), 0xa77ac4}));
      double loss_sum = 0.0;
      int batches = 0;
      for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
        const Batch clean = gather_rows(*args.train, order, begin, std::min(order.size(), begin + batch_size));
        const Batch batch = args.attack ? pgd_attack(out.params, *args.spec, clean, *args.attack, attack_rng) : clean;
        LossAndGrads lg = loss_and_grads(out.params, *args.spec, batch);
        if (args.curv && !args.curv->anchors.empty())
          lg.grads.param_grad += args.curv->lambda * curv_penalty(out.params, args.curv->anchors).grad;
        step(out.params, lg.grads.param_grad, *args.optimizer, client.optimizer);
        loss_sum += lg.loss;
        ++batches;
      }
      out.last_epoch_loss = loss_sum / batches;
    }
  } catch (const Error& e) {
    throw Error("client " + std::to_string(client.id) + ": " + e.what());
  }
  return out;
}

Evaluation evaluate(const ParamVector& params, const ModelSpec& spec, const Batch& testset, const AttackConfig* attack,
                    std::uint64_t seed) {
  if (testset.size() == 0) throw Error("evaluation needs a non-empty test set");
  auto accuracy = [&](const Matrix& inputs) {
    const auto pred = predict(params, spec, inputs);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == testset.labels[i];
    return static_cast<double>(hits) / static_cast<double>(pred.size());
  };
  Evaluation ev;
  ev.natural_accuracy = accuracy(testset.inputs);
  if (attack) {
    Rng rng(derive_seed(seed, {kEvalStream}));
    ev.adversarial_accuracy = accuracy(pgd_attack(params, spec, testset, *attack, rng).inputs);
  }
  return ev;
}

nlohmann::json to_json(const RoundReport& r) {
  nlohmann::json j;
  j["round"] = r.round;
  j["e_t"] = r.epochs;
  j["nat_acc"] = r.natural_accuracy ? nlohmann::json(*r.natural_accuracy) : nlohmann::json(nullptr);
  j["adv_acc"] = r.adversarial_accuracy ? nlohmann::json(*r.adversarial_accuracy) : nlohmann::json(nullptr);
  j["mean_loss"] = r.mean_loss;
  j["client_loss"] = r.client_losses;
  for (std::size_t i = 0; i < r.svcca_layers.size(); ++i) {
    const std::string l = std::to_string(r.svcca_layers[i]);
    j["svcca_l" + l] = r.svcca_pair01[i];
    j["svcca_mean_l" + l] = r.svcca_mean[i];
  }
  return j;
}

std::pair<Dataset, Dataset> load_datasets(const ExperimentConfig& config) {
  if (config.data.source == "csv") {
    Dataset train = load_csv(config.data.csv_train, config.data.rescale);
    Dataset test = load_csv(config.data.csv_test, config.data.rescale);
    if (train.inputs.cols() != test.inputs.cols()) throw Error("train and test CSV widths differ");
    test.class_count = train.class_count = std::max(train.class_count, test.class_count);
    return {std::move(train), std::move(test)};
  }
  SyntheticSpec spec = config.data.synthetic;
  spec.seed = derive_seed(config.seed, {0x7a1});
  Dataset train = make_synthetic(spec);
  spec.per_class = config.data.test_per_class;
  spec.seed = derive_seed(config.seed, {0x7e57});
  Dataset test = make_synthetic(spec);
  return {std::move(train), std::move(test)};
}

Simulation::Simulation(ExperimentConfig config, int workers) : config_(std::move(config)), workers_(workers) {
  std::tie(train_, test_) = load_datasets(config_);
  if (train_.inputs.cols() != config_.model.input_dim())
    throw Error("model input width does not match the dataset");
  if (train_.class_count != config_.model.class_count())
    throw Error("model class count does not match the dataset");

  const Partition part = config_.non_iid
                             ? partition_non_iid(train_, PartitionSpec{config_.clients, config_.skew, config_.seed})
                             : partition_iid(train_, config_.clients, config_.seed);
  for (int k = 0; k < config_.clients; ++k) {
    ClientState c;
    c.id = k;
    c.shard = part.shards[static_cast<std::size_t>(k)];
    if (c.shard.empty()) throw Error("client " + std::to_string(k) + " received an empty shard");
    clients_.push_back(std::move(c));
  }

  global_ = init_params(config_.model);

  // Probe: a seeded subset of natural test inputs.
  std::vector<int> idx(static_cast<std::size_t>(test_.size()));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(config_.seed, {kProbeStream}));
  shuffle(idx, rng);
  idx.resize(std::min(idx.size(), static_cast<std::size_t>(config_.svcca.probe_size)));
  std::sort(idx.begin(), idx.end());
  probe_ = test_.gather(idx).inputs;
}

RoundReport Simulation::run_round() {
  const auto started = std::chrono::steady_clock::now();
  const int t = round_;
  RoundReport report;
  report.round = t;
  report.epochs = epochs_for_round(t, config_.schedule);

  const bool curv = config_.fusion == FusionKind::fedcurv;
  const AttackConfig train_attack = config_.attack;
  const int k_count = static_cast<int>(clients_.size());

  std::vector<CurvContext> contexts(clients_.size());
  if (curv)
    for (std::size_t k = 0; k < clients_.size(); ++k) contexts[k] = curv_context_for(anchors_, k, config_.lambda);

  std::vector<LocalTrainResult> results(clients_.size());
  std::vector<ClientPayload> payloads(clients_.size());
  parallel_for(k_count, workers_, [&](int k) {
    auto& client = clients_[static_cast<std::size_t>(k)];
    LocalTrainArgs args;
    args.train = &train_;
    args.spec = &config_.model;
    args.optimizer = &config_.optimizer;
    args.attack = config_.natural_training ? nullptr : &train_attack;
    args.curv = curv ? &contexts[static_cast<std::size_t>(k)] : nullptr;
    args.epochs = report.epochs;
    args.round = t;
    args.master_seed = config_.seed;
    auto& res = results[static_cast<std::size_t>(k)];
    res = local_adversarial_train(client, global_, args);

    auto& p = payloads[static_cast<std::size_t>(k)];
    p.params = res.params;
    p.shard_size = client.shard.size();
    if (curv) p.fisher = fisher_diag(res.params, config_.model, train_.gather(client.shard));
  });

  if (curv) {
    CurvFusion fused = fedcurv_fuse(payloads);
    global_ = std::move(fused.global);
    anchors_ = std::move(fused.broadcast);
  } else {
    global_ = fedavg_fuse(payloads);
  }

  local_models_.clear();
  for (auto& r : results) {
    report.client_losses.push_back(r.last_epoch_loss);
    local_models_.push_back(std::move(r.params));
  }
  report.mean_loss = std::accumulate(report.client_losses.begin(), report.client_losses.end(), 0.0) /
                     static_cast<double>(report.client_losses.size());

  const bool last = t + 1 == config_.rounds;
  const bool eval_now = last || (config_.eval.every > 0 && (t + 1) % config_.eval.every == 0);
  if (eval_now) {
    const AttackConfig eval_attack = config_.eval_attack();
    const bool measure_adv =
        config_.eval.adversarial && (!config_.natural_training || config_.eval.natural_adv == NaturalAdvPolicy::measured);
    const Evaluation ev = evaluate(global_, config_.model, test_.all(), measure_adv ? &eval_attack : nullptr,
                                   derive_seed(config_.seed, {static_cast<std::uint64_t>(t)}));
    report.natural_accuracy = ev.natural_accuracy;
    report.adversarial_accuracy = ev.adversarial_accuracy;
    if (config_.natural_training && config_.eval.natural_adv == NaturalAdvPolicy::zero) report.adversarial_accuracy = 0.0;
  }

  const bool drift_now = config_.svcca.every > 0 && ((t + 1) % config_.svcca.every == 0 || last);
  if (drift_now && local_models_.size() >= 2) {
    std::vector<int> layers = config_.svcca.layers;
    if (layers.empty())
      for (int l = 0; l < config_.model.depth(); ++l) layers.push_back(l);
    const DriftReport drift = drift_report(local_models_, config_.model, probe_, layers, config_.svcca.variance_keep);
    report.svcca_layers = layers;
    report.svcca_pair01 = drift.pairs.front().scores;
    report.svcca_mean = drift.mean_scores;
  }

  ++round_;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  Simulation sim(config, options.workers);
  ExperimentResult result;
  result.spec = config.model;
  for (int t = 0; t < config.rounds; ++t) {
    result.reports.push_back(sim.run_round());
    if (options.sink) options.sink(result.reports.back());
    if (options.checkpoint_dir && config.checkpoint_every > 0 && (t + 1) % config.checkpoint_every == 0)
      write_checkpoint(*options.checkpoint_dir / ("round_" + std::to_string(t) + ".ckpt"),
                       Checkpoint{config.model, sim.global(), "params"});
  }
  result.final_params = sim.global();
  if (options.checkpoint_dir)
    write_checkpoint(*options.checkpoint_dir / "final.ckpt", Checkpoint{config.model, result.final_params, "params"});
  return result;
}

ParamVector interpolate_models(const ParamVector& a, const ParamVector& b, double w) {
  if (a.size() != b.size()) throw Error("cannot interpolate models of different lengths");
  // b + w (a - b) reproduces b at w = 0 and is constant in w when a == b.
  if (w == 1.0) return a;
  return b + w * (a - b);
}

std::vector<double> default_interpolation_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 28; ++i) grid.push_back(static_cast<double>(5 * i - 20) / 100.0);
  return grid;
}

std::vector<SweepPoint> loss_sweep(const ParamVector& a, const ParamVector& b, const ModelSpec& spec,
                                   const Batch& data, const AttackConfig* attack, const std::vector<double>& grid,
                                   std::uint64_t seed) {
  if (a.size() != b.size()) throw Error("cannot interpolate models of different lengths");
  std::vector<SweepPoint> out;
  for (double w : grid) {
    const ParamVector theta = interpolate_models(a, b, w);
    SweepPoint p;
    p.w = w;
    p.natural_loss = loss(theta, spec, data);
    if (attack) {
      Rng rng(derive_seed(seed, {kEvalStream}));
      p.adversarial_loss = loss(theta, spec, pgd_attack(theta, spec, data, *attack, rng));
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace fedat

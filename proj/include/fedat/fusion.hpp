#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fedat/nn.hpp"

namespace fedat {

/// What one client sends to the server at the end of a round.
struct ClientPayload {
  ParamVector params;
  std::size_t shard_size = 0;
  std::optional<Vector> fisher;  // required for FedCurv
};

/// A previous-round (weights, Fisher diagonal) pair another client anchors to.
struct CurvAnchor {
  ParamVector params;
  Vector fisher;
};

/// Everything client k needs for its penalty during one round. Frozen while
/// local training runs.
struct CurvContext {
  double lambda = 0.0;
  std::vector<CurvAnchor> anchors;  // previous round, every client except k
};

/// Weighted mean of client params with weights |D_k| / |D|.
ParamVector fedavg_fuse(std::span<const ClientPayload> payloads);

/// Empirical Fisher diagonal: mean over shard samples of the squared
/// per-sample gradient of the cross-entropy at the true label.
Vector fisher_diag(const ParamVector& params, const ModelSpec& spec, const Batch& shard);

struct Penalty {
  double value = 0.0;
  Vector grad;
};

/// R(theta) = sum_j sum_i F_j[i] (theta[i] - anchor_j[i])^2 and its gradient.
/// Unscaled; the caller multiplies by lambda.
Penalty curv_penalty(const Vector& theta, std::span<const CurvAnchor> anchors);

struct CurvFusion {
  ParamVector global;
  std::vector<CurvAnchor> broadcast;  // one per client, in client order
};

/// FedAvg on the weights plus the (weights, Fisher) set for next round's
/// penalties. Throws when any payload lacks a Fisher diagonal.
CurvFusion fedcurv_fuse(std::span<const ClientPayload> payloads);

/// Anchors for client k: the broadcast set without k's own entry.
CurvContext curv_context_for(const std::vector<CurvAnchor>& broadcast, std::size_t client, double lambda);

}  // namespace fedat

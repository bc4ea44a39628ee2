#include "fedat/fusion.hpp"

namespace fedat {

ParamVector fedavg_fuse(std::span<const ClientPayload> payloads) {
  if (payloads.empty()) throw Error("fusion needs at least one payload");
  const Eigen::Index n = payloads.front().params.size();
  double total = 0.0;
  for (const auto& p : payloads) {
    if (p.params.size() != n) throw Error("payload parameter lengths differ");
    if (p.shard_size == 0) throw Error("payload shard size must be positive");
    total += static_cast<double>(p.shard_size);
  }
  ParamVector fused = ParamVector::Zero(n);
  for (const auto& p : payloads) fused += (static_cast<double>(p.shard_size) / total) * p.params;
  return fused;
}

Vector fisher_diag(const ParamVector& params, const ModelSpec& spec, const Batch& shard) {
  detail::check_batch(spec, params, shard);
  const ForwardResult fwd = forward(params, spec, shard.inputs);

  // Per-sample loss gradients (not averaged): dlogits = softmax - onehot.
  Matrix dlogits = softmax(fwd.logits);
  for (Eigen::Index i = 0; i < shard.size(); ++i) dlogits(i, shard.labels[static_cast<std::size_t>(i)]) -= 1.0;
  const detail::Backprop bp = detail::backward(params, spec, shard.inputs, fwd, dlogits);

  // Per-sample weight gradient is the outer product a_i delta_i^T, so its
  // elementwise square summed over samples is (a*a)^T (delta*delta).
  const ParamLayout layout = param_layout(spec);
  const auto n = static_cast<double>(shard.size());
  Vector fisher = Vector::Zero(params.size());
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const auto& s = layout.layers[l];
    const Matrix a2 = bp.layer_inputs[l].cwiseAbs2();
    const Matrix d2 = bp.deltas[l].cwiseAbs2();
    Eigen::Map<Matrix> fw(fisher.data() + s.weight_offset, s.fan_in, s.fan_out);
    fw.noalias() = a2.transpose() * d2 / n;
    Eigen::Map<Eigen::RowVectorXd> fb(fisher.data() + s.bias_offset, s.fan_out);
    fb = d2.colwise().sum() / n;
  }
  if (!fisher.allFinite()) throw Error("non-finite Fisher diagonal");
  return fisher;
}

Penalty curv_penalty(const Vector& theta, std::span<const CurvAnchor> anchors) {
  Penalty out;
  out.grad = Vector::Zero(theta.size());
  for (const auto& a : anchors) {
    if (a.params.size() != theta.size() || a.fisher.size() != theta.size())
      throw Error("penalty anchor shape does not match parameters");
    const Vector diff = theta - a.params;
    out.value += a.fisher.dot(diff.cwiseAbs2());
    out.grad += 2.0 * a.fisher.cwiseProduct(diff);
  }
  return out;
}

CurvFusion fedcurv_fuse(std::span<const ClientPayload> payloads) {
  CurvFusion out;
  out.global = fedavg_fuse(payloads);
  out.broadcast.reserve(payloads.size());
  for (const auto& p : payloads) {
    if (!p.fisher) throw Error("fedcurv fusion needs every client's Fisher diagonal");
    if (p.fisher->size() != p.params.size()) throw Error("Fisher diagonal length differs from parameters");
    if ((p.fisher->array() < 0.0).any() || !p.fisher->allFinite())
      throw Error("Fisher diagonal must be finite and non-negative");
    out.broadcast.push_back({p.params, *p.fisher});
  }
  return out;
}

CurvContext curv_context_for(const std::vector<CurvAnchor>& broadcast, std::size_t client, double lambda) {
  CurvContext ctx;
  ctx.lambda = lambda;
  for (std::size_t j = 0; j < broadcast.size(); ++j)
    if (j != client) ctx.anchors.push_back(broadcast[j]);
  return ctx;
}

}  // namespace fedat

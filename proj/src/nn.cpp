#include "fedat/nn.hpp"

#include <cmath>
#include <sstream>

#include "fedat/rng.hpp"

namespace fedat {
namespace {

using ConstWeights = Eigen::Map<const Matrix>;

ConstWeights weights_of(const ParamVector& params, const LayerSlice& s) {
  return ConstWeights(params.data() + s.weight_offset, s.fan_in, s.fan_out);
}

Eigen::Map<const Eigen::RowVectorXd> bias_of(const ParamVector& params, const LayerSlice& s) {
  return Eigen::Map<const Eigen::RowVectorXd>(params.data() + s.bias_offset, s.fan_out);
}

void require_finite(const Matrix& m, const char* what, int layer) {
  if (!m.allFinite()) {
    std::ostringstream os;
    os << "non-finite " << what << " in layer " << layer;
    throw Error(os.str());
  }
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw Error("unknown activation '" + name + "'");
}

void ModelSpec::validate() const {
  if (layer_sizes.size() < 2) throw Error("model needs at least 2 layer sizes");
  for (int n : layer_sizes)
    if (n <= 0) throw Error("layer sizes must be positive");
}

ParamLayout param_layout(const ModelSpec& spec) {
  spec.validate();
  ParamLayout layout;
  std::size_t offset = 0;
  for (int l = 0; l < spec.depth(); ++l) {
    LayerSlice s;
    s.fan_in = spec.layer_sizes[l];
    s.fan_out = spec.layer_sizes[l + 1];
    s.weight_offset = offset;
    offset += static_cast<std::size_t>(s.fan_in) * s.fan_out;
    s.bias_offset = offset;
    offset += s.fan_out;
    layout.layers.push_back(s);
  }
  layout.size = offset;
  return layout;
}

ParamVector init_params(const ModelSpec& spec) {
  const ParamLayout layout = param_layout(spec);
  ParamVector params = ParamVector::Zero(static_cast<Eigen::Index>(layout.size));
  Rng rng(derive_seed(spec.seed, {0x1a17}));
  for (const auto& s : layout.layers) {
    const double limit = std::sqrt(6.0 / (s.fan_in + s.fan_out));
    const std::size_t n = static_cast<std::size_t>(s.fan_in) * s.fan_out;
    for (std::size_t i = 0; i < n; ++i)
      params[static_cast<Eigen::Index>(s.weight_offset + i)] = limit * (2.0 * uniform01(rng) - 1.0);
  }
  return params;
}

Matrix softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

Vector per_sample_loss(const Matrix& logits, const std::vector<int>& labels) {
  Vector losses(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    losses[i] = lse - logits(i, labels[static_cast<std::size_t>(i)]);
  }
  return losses;
}

ForwardResult forward(const ParamVector& params, const ModelSpec& spec, const Matrix& inputs) {
  const ParamLayout layout = param_layout(spec);
  if (static_cast<std::size_t>(params.size()) != layout.size)
    throw Error("parameter vector length does not match model spec");
  if (inputs.cols() != spec.input_dim()) throw Error("input width does not match model spec");

  ForwardResult result;
  Matrix a = inputs;
  for (int l = 0; l < spec.depth(); ++l) {
    const auto& s = layout.layers[static_cast<std::size_t>(l)];
    Matrix z = a * weights_of(params, s);
    z.rowwise() += bias_of(params, s);
    require_finite(z, "pre-activation", l);
    if (l + 1 == spec.depth()) {
      result.logits = std::move(z);
      break;
    }
    if (spec.activation == Activation::relu)
      a = z.cwiseMax(0.0);
    else
      a = z.array().tanh().matrix();
    result.hidden.push_back(a);
  }
  return result;
}

namespace detail {

void check_batch(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  if (batch.inputs.rows() != static_cast<Eigen::Index>(batch.labels.size()))
    throw Error("batch inputs and labels disagree in length");
  if (batch.inputs.rows() == 0) throw Error("empty batch");
  if (batch.inputs.cols() != spec.input_dim()) throw Error("input width does not match model spec");
  if (static_cast<std::size_t>(params.size()) != param_layout(spec).size)
    throw Error("parameter vector length does not match model spec");
  for (int y : batch.labels)
    if (y < 0 || y >= spec.class_count()) throw Error("label out of range");
}

Backprop backward(const ParamVector& params, const ModelSpec& spec, const Matrix& inputs,
                  const ForwardResult& fwd, const Matrix& dlogits) {
  const ParamLayout layout = param_layout(spec);
  const int depth = spec.depth();
  Backprop bp;
  bp.layer_inputs.resize(static_cast<std::size_t>(depth));
  bp.deltas.resize(static_cast<std::size_t>(depth));
  for (int l = 0; l < depth; ++l)
    bp.layer_inputs[static_cast<std::size_t>(l)] = l == 0 ? inputs : fwd.hidden[static_cast<std::size_t>(l - 1)];

  Matrix delta = dlogits;
  for (int l = depth - 1; l >= 0; --l) {
    const auto& s = layout.layers[static_cast<std::size_t>(l)];
    Matrix upstream = delta * weights_of(params, s).transpose();
    require_finite(upstream, "gradient", l);
    bp.deltas[static_cast<std::size_t>(l)] = std::move(delta);
    if (l == 0) {
      bp.input_grad = std::move(upstream);
      break;
    }
    const Matrix& act = fwd.hidden[static_cast<std::size_t>(l - 1)];
    if (spec.activation == Activation::relu)
      delta = upstream.cwiseProduct((act.array() > 0.0).cast<double>().matrix());
    else
      delta = upstream.cwiseProduct((1.0 - act.array().square()).matrix());
  }
  return bp;
}

}  // namespace detail

LossAndGrads loss_and_grads(const ParamVector& params, const ModelSpec& spec, const Batch& batch) {
  detail::check_batch(spec, params, batch);
  const ForwardResult fwd = forward(params, spec, batch.inputs);
  const auto n = static_cast<double>(batch.size());

  LossAndGrads out;
  out.loss = per_sample_loss(fwd.logits, batch.labels).sum() / n;

  Matrix dlogits = softmax(fwd.logits);
  for (Eigen::Index i = 0; i < batch.size(); ++i) dlogits(i, batch.labels[static_cast<std::size_t>(i)]) -= 1.0;
  dlogits /= n;

  detail::Backprop bp = detail::backward(params, spec, batch.inputs, fwd, dlogits);
  const ParamLayout layout = param_layout(spec);
  out.grads.param_grad = ParamVector::Zero(params.size());
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const auto& s = layout.layers[l];
    Eigen::Map<Matrix> gw(out.grads.param_grad.data() + s.weight_offset, s.fan_in, s.fan_out);
    gw.noalias() = bp.layer_inputs[l].transpose() * bp.deltas[l];
    Eigen::Map<Eigen::RowVectorXd> gb(out.grads.param_grad.data() + s.bias_offset, s.fan_out);
    gb = bp.deltas[l].colwise().sum();
  }
  out.grads.input_grad = std::move(bp.input_grad);
  return out;
}

double loss(const ParamVector& params, const ModelSpec& spec, const Batch& batch) {
  detail::check_batch(spec, params, batch);
  const ForwardResult fwd = forward(params, spec, batch.inputs);
  return per_sample_loss(fwd.logits, batch.labels).mean();
}

std::vector<int> predict(const ParamVector& params, const ModelSpec& spec, const Matrix& inputs) {
  const ForwardResult fwd = forward(params, spec, inputs);
  std::vector<int> out(static_cast<std::size_t>(inputs.rows()));
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    Eigen::Index best = 0;
    fwd.logits.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace fedat

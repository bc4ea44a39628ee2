#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fedat/types.hpp"

namespace fedat {

enum class Activation { relu, tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Architecture of a dense classifier: input dim, hidden widths, class count.
struct ModelSpec {
  std::vector<int> layer_sizes;
  Activation activation = Activation::relu;
  std::uint64_t seed = 0;

  int input_dim() const { return layer_sizes.front(); }
  int class_count() const { return layer_sizes.back(); }
  /// Number of weight layers (= layer_sizes.size() - 1).
  int depth() const { return static_cast<int>(layer_sizes.size()) - 1; }

  /// Throws Error on fewer than two sizes or non-positive widths.
  void validate() const;

  bool operator==(const ModelSpec&) const = default;
};

/// Where one dense layer lives inside a ParamVector.
struct LayerSlice {
  std::size_t weight_offset = 0;  // fan_in x fan_out block, row-major
  std::size_t bias_offset = 0;    // fan_out entries
  int fan_in = 0;
  int fan_out = 0;
};

struct ParamLayout {
  std::vector<LayerSlice> layers;
  std::size_t size = 0;
};

ParamLayout param_layout(const ModelSpec& spec);

/// Xavier-uniform weights, zero biases; a pure function of (spec, seed).
ParamVector init_params(const ModelSpec& spec);

struct Batch {
  Matrix inputs;            // batch x input_dim
  std::vector<int> labels;  // batch

  Eigen::Index size() const { return inputs.rows(); }
};

struct ForwardResult {
  Matrix logits;              // batch x classes
  std::vector<Matrix> hidden;  // post-activation of each hidden layer, batch x width
};

ForwardResult forward(const ParamVector& params, const ModelSpec& spec, const Matrix& inputs);

struct GradPair {
  ParamVector param_grad;  // dL/dtheta
  Matrix input_grad;       // dL/dx, shaped like the batch inputs
};

struct LossAndGrads {
  double loss = 0.0;  // mean cross-entropy
  GradPair grads;
};

/// Mean cross-entropy and both gradients in one reverse pass.
LossAndGrads loss_and_grads(const ParamVector& params, const ModelSpec& spec, const Batch& batch);

/// Mean cross-entropy only.
double loss(const ParamVector& params, const ModelSpec& spec, const Batch& batch);

/// Per-sample cross-entropy, numerically stable.
Vector per_sample_loss(const Matrix& logits, const std::vector<int>& labels);

/// Index of the largest logit per row (first on ties).
std::vector<int> predict(const ParamVector& params, const ModelSpec& spec, const Matrix& inputs);

/// Row-wise softmax with max subtraction.
Matrix softmax(const Matrix& logits);

namespace detail {

/// Backward pass from d(sum of per-sample losses)/d(logits). Returns, for each
/// weight layer, the layer input (batch x fan_in) and delta (batch x fan_out)
/// so callers can form either summed or per-sample parameter gradients.
struct Backprop {
  std::vector<Matrix> layer_inputs;
  std::vector<Matrix> deltas;
  Matrix input_grad;
};

Backprop backward(const ParamVector& params, const ModelSpec& spec, const Matrix& inputs,
                  const ForwardResult& fwd, const Matrix& dlogits);

void check_batch(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

}  // namespace detail
}  // namespace fedat

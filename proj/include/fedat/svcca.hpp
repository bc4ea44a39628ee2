#pragma once

#include <utility>
#include <vector>

#include "fedat/nn.hpp"

namespace fedat {

/// Neuron activations of one layer over a probe set: rows are neurons,
/// columns probe points, each row mean-centered.
struct ActivationMatrix {
  Matrix values;
  int layer = 0;
};

/// Layers are numbered 0..depth-1: hidden layers first, the logit layer last.
ActivationMatrix layer_activations(const ParamVector& params, const ModelSpec& spec, const Matrix& probe,
                                   int layer);

/// Subtracts each row's mean.
Matrix center_rows(const Matrix& m);

struct SvccaResult {
  double score = 0.0;
  std::vector<double> correlations;  // descending
  int kept_a = 0;
  int kept_b = 0;
  bool degenerate = false;  // one side had rank zero
};

/// SVD-truncate each side to the rank holding `variance_keep` of its squared
/// singular-value mass, then average the canonical correlations between the
/// two reduced subspaces.
SvccaResult svcca_score(const Matrix& a, const Matrix& b, double variance_keep = 0.99);

struct PairScores {
  int client_a = 0;
  int client_b = 0;
  std::vector<double> scores;  // one per requested layer
};

struct DriftReport {
  std::vector<int> layers;
  std::vector<PairScores> pairs;   // every unordered pair, lexicographic
  std::vector<double> mean_scores;  // per layer, over all pairs
};

DriftReport drift_report(const std::vector<ParamVector>& clients, const ModelSpec& spec, const Matrix& probe,
                         const std::vector<int>& layers, double variance_keep = 0.99);

}  // namespace fedat

#include "fedat/svcca.hpp"

#include <Eigen/SVD>
#include <algorithm>

namespace fedat {
namespace {

constexpr double kWhitenFloor = 1e-10;

// Returns the whitened reduced data of `m` (kept x P, orthonormal-ish rows)
// after keeping the leading directions that hold `keep` of the spectrum.
Matrix reduced_whitened(const Matrix& m, double keep, int& kept) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinV);
  const Vector s = svd.singularValues();
  const double total = s.cwiseAbs2().sum();
  kept = 0;
  if (total <= 0.0 || s[0] <= 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) return Matrix(0, m.cols());
  double acc = 0.0;
  while (kept < s.size()) {
    acc += s[kept] * s[kept];
    ++kept;
    if (acc >= keep * total) break;
  }
  // Reduced data is S_k V_k^T; its whitening divides each row by its singular
  // value, regularized against near-zero directions.
  Matrix out(kept, m.cols());
  for (int i = 0; i < kept; ++i) out.row(i) = (s[i] / (s[i] + kWhitenFloor)) * svd.matrixV().col(i).transpose();
  return out;
}

}  // namespace

Matrix center_rows(const Matrix& m) {
  Matrix out = m;
  if (m.cols() == 0) return out;
  out.colwise() -= m.rowwise().mean();
  return out;
}

ActivationMatrix layer_activations(const ParamVector& params, const ModelSpec& spec, const Matrix& probe,
                                   int layer) {
  if (layer < 0 || layer >= spec.depth()) throw Error("layer index out of range for model");
  const ForwardResult fwd = forward(params, spec, probe);
  const Matrix& acts = layer + 1 == spec.depth() ? fwd.logits : fwd.hidden[static_cast<std::size_t>(layer)];
  return ActivationMatrix{center_rows(acts.transpose()), layer};
}

SvccaResult svcca_score(const Matrix& a, const Matrix& b, double variance_keep) {
  if (a.cols() != b.cols()) throw Error("SVCCA inputs need the same number of probe points");
  if (!(variance_keep > 0.0 && variance_keep <= 1.0)) throw Error("variance_keep must lie in (0, 1]");
  if (!a.allFinite() || !b.allFinite()) throw Error("SVCCA inputs must be finite");

  SvccaResult result;
  const Matrix wa = reduced_whitened(center_rows(a), variance_keep, result.kept_a);
  const Matrix wb = reduced_whitened(center_rows(b), variance_keep, result.kept_b);
  if (result.kept_a == 0 || result.kept_b == 0) {
    result.degenerate = true;
    result.score = (result.kept_a == 0 && result.kept_b == 0) ? 1.0 : 0.0;
    return result;
  }

  const Eigen::MatrixXd cross = wa * wb.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross);
  const Vector rho = svd.singularValues().cwiseMax(0.0).cwiseMin(1.0);
  result.correlations.assign(rho.data(), rho.data() + rho.size());
  result.score = rho.mean();
  return result;
}

DriftReport drift_report(const std::vector<ParamVector>& clients, const ModelSpec& spec, const Matrix& probe,
                         const std::vector<int>& layers, double variance_keep) {
  if (clients.size() < 2) throw Error("drift report needs at least two clients");
  DriftReport report;
  report.layers = layers;
  report.mean_scores.assign(layers.size(), 0.0);

  std::vector<std::vector<Matrix>> acts(clients.size());
  for (std::size_t k = 0; k < clients.size(); ++k)
    for (int l : layers) acts[k].push_back(layer_activations(clients[k], spec, probe, l).values);

  for (std::size_t i = 0; i < clients.size(); ++i) {
    for (std::size_t j = i + 1; j < clients.size(); ++j) {
      PairScores ps{static_cast<int>(i), static_cast<int>(j), {}};
      for (std::size_t l = 0; l < layers.size(); ++l) {
        ps.scores.push_back(svcca_score(acts[i][l], acts[j][l], variance_keep).score);
        report.mean_scores[l] += ps.scores.back();
      }
      report.pairs.push_back(std::move(ps));
    }
  }
  for (double& m : report.mean_scores) m /= static_cast<double>(report.pairs.size());
  return report;
}

}  // namespace fedat

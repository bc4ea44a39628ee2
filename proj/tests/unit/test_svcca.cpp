#include <doctest.h>

#include <random>

#include "fedat/svcca.hpp"
#include "support/oracles.hpp"

using namespace fedat;

namespace {
Matrix gaussian(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}
}  // namespace

TEST_CASE("self similarity is one") {
  std::mt19937_64 rng(1);
  const Matrix a = gaussian(rng, 8, 300);
  const SvccaResult r = svcca_score(a, a);
  CHECK(r.score == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_FALSE(r.degenerate);
}

TEST_CASE("rotating the neuron space leaves the score at one") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix a = gaussian(rng, 10, 400);
    const Matrix q = oracle::random_orthogonal(rng, 10);
    CHECK(svcca_score(a, q * a).score == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("invertible linear maps barely change the untruncated score") {
  // Truncation picks directions by variance, which a non-orthogonal map
  // reshuffles, so invariance is checked with the full spectrum kept.
  std::mt19937_64 rng(3);
  const Matrix a = gaussian(rng, 6, 500);
  const Matrix b = gaussian(rng, 6, 500) * 0.5 + a;
  Matrix m = gaussian(rng, 6, 6) + 3.0 * Matrix::Identity(6, 6);
  const double base = svcca_score(a, b, 1.0).score;
  CHECK(std::abs(svcca_score(m * a, b, 1.0).score - base) < 1e-4);
  CHECK(std::abs(svcca_score(a, m * b, 1.0).score - base) < 1e-4);
}

TEST_CASE("invertible maps of a low-rank layer keep the truncated score") {
  std::mt19937_64 rng(13);
  const Matrix latent = gaussian(rng, 3, 500);
  const Matrix a = gaussian(rng, 6, 3) * latent + 1e-4 * gaussian(rng, 6, 500);
  const Matrix b = gaussian(rng, 5, 3) * (latent + 0.4 * gaussian(rng, 3, 500)) + 1e-4 * gaussian(rng, 5, 500);
  Matrix m = gaussian(rng, 6, 6) + 3.0 * Matrix::Identity(6, 6);
  const SvccaResult base = svcca_score(a, b);
  const SvccaResult mapped = svcca_score(m * a, b);
  CHECK(base.kept_a == 3);
  CHECK(mapped.kept_a == 3);
  CHECK(std::abs(mapped.score - base.score) < 1e-4);
}

TEST_CASE("independent noise scores low") {
  std::mt19937_64 rng(4);
  const Matrix a = gaussian(rng, 10, 2000);
  const Matrix b = gaussian(rng, 10, 2000);
  const SvccaResult r = svcca_score(a, b);
  CHECK(r.score < 0.5);
  CHECK(r.score >= 0.0);
}

TEST_CASE("score is symmetric and in range") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = gaussian(rng, 4 + trial % 4, 120);
    const Matrix b = gaussian(rng, 3 + trial % 5, 120) + 0.3 * gaussian(rng, 1, 120).replicate(3 + trial % 5, 1);
    const double ab = svcca_score(a, b).score;
    const double ba = svcca_score(b, a).score;
    CHECK(std::abs(ab - ba) < 1e-9);
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0 + 1e-9);
  }
}

TEST_CASE("truncation keeps the rank holding the requested variance") {
  Matrix a = Matrix::Zero(3, 4);
  a << 10, -10, 10, -10,  //
      1, 1, -1, -1,       //
      0, 0, 0, 0;
  const SvccaResult r = svcca_score(a, a, 0.9);
  CHECK(r.kept_a == 1);
  CHECK(svcca_score(a, a, 0.999).kept_a == 2);
}

TEST_CASE("rank-zero layers are degenerate") {
  const Matrix zero = Matrix::Zero(4, 50);
  std::mt19937_64 rng(6);
  const SvccaResult both = svcca_score(zero, zero);
  CHECK(both.degenerate);
  CHECK(both.score == 1.0);
  const SvccaResult one = svcca_score(zero, gaussian(rng, 4, 50));
  CHECK(one.degenerate);
  CHECK(one.score == 0.0);
}

TEST_CASE("probe counts must agree") {
  CHECK_THROWS_AS(svcca_score(Matrix::Ones(2, 5), Matrix::Ones(2, 6)), Error);
}

TEST_CASE("layer activations are centered neuron-by-probe matrices") {
  const ModelSpec spec{{3, 6, 4, 2}, Activation::relu, 4};
  std::mt19937_64 rng(7);
  const Matrix probe = oracle::random_batch(rng, 25, 3, 2).inputs;
  const ParamVector theta = init_params(spec);
  for (int l = 0; l < 3; ++l) {
    const ActivationMatrix m = layer_activations(theta, spec, probe, l);
    CHECK(m.values.rows() == spec.layer_sizes[static_cast<std::size_t>(l + 1)]);
    CHECK(m.values.cols() == 25);
    CHECK(m.values.rowwise().mean().cwiseAbs().maxCoeff() < 1e-14);
    CHECK(layer_activations(theta, spec, probe, l).values == m.values);
  }
  CHECK_THROWS_AS(layer_activations(theta, spec, probe, 3), Error);
  CHECK_THROWS_AS(layer_activations(theta, spec, probe, -1), Error);

  const ParamVector zero = ParamVector::Zero(theta.size());
  CHECK(layer_activations(zero, spec, probe, 1).values.isZero(0.0));
}

TEST_CASE("centering is idempotent") {
  std::mt19937_64 rng(8);
  const Matrix c = center_rows(gaussian(rng, 5, 40) + Matrix::Constant(5, 40, 3.0));
  CHECK((center_rows(c) - c).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("drift report enumerates pairs") {
  const ModelSpec spec{{3, 5, 2}, Activation::tanh, 1};
  std::mt19937_64 rng(9);
  const Matrix probe = oracle::random_batch(rng, 30, 3, 2).inputs;
  const ParamVector theta = init_params(spec);

  const DriftReport same = drift_report({theta, theta, theta}, spec, probe, {0, 1});
  CHECK(same.pairs.size() == 3);
  for (const auto& p : same.pairs)
    for (double s : p.scores) CHECK(s == doctest::Approx(1.0).epsilon(1e-6));

  std::vector<ParamVector> four;
  for (std::uint64_t s = 0; s < 4; ++s) four.push_back(init_params(ModelSpec{{3, 5, 2}, Activation::tanh, s}));
  const DriftReport r = drift_report(four, spec, probe, {0});
  CHECK(r.pairs.size() == 6);
  CHECK(r.pairs.front().client_a == 0);
  CHECK(r.pairs.front().client_b == 1);
  CHECK_THROWS_AS(drift_report({theta}, spec, probe, {0}), Error);
}

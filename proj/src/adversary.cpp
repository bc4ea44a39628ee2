#include "fedat/adversary.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace fedat {
namespace {

double parse_number(std::string_view s, const std::string& original) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw Error("cannot parse number '" + original + "'");
  return v;
}

double sign(double g) { return g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0); }

}  // namespace

void AttackConfig::validate() const {
  if (steps < 0) throw Error("attack.t_steps must be non-negative");
  if (!(epsilon > 0.0)) throw Error("attack.epsilon must be > 0");
  if (!(alpha > 0.0)) throw Error("attack.alpha must be > 0");
  if (!(lo < hi)) throw Error("attack input range requires lo < hi");
}

double parse_fraction(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) return parse_number(text, text);
  const double num = parse_number(std::string_view(text).substr(0, slash), text);
  const double den = parse_number(std::string_view(text).substr(slash + 1), text);
  if (den == 0.0) throw Error("zero denominator in '" + text + "'");
  return num / den;
}

Batch pgd_attack(const ParamVector& params, const ModelSpec& spec, const Batch& batch,
                 const AttackConfig& config, Rng& rng) {
  config.validate();
  detail::check_batch(spec, params, batch);
  if ((batch.inputs.array() < config.lo).any() || (batch.inputs.array() > config.hi).any())
    throw Error("attack input outside the valid range");

  const Matrix& x = batch.inputs;
  const Matrix lower = (x.array() - config.epsilon).cwiseMax(config.lo).matrix();
  const Matrix upper = (x.array() + config.epsilon).cwiseMin(config.hi).matrix();

  Batch adv{x, batch.labels};
  if (config.random_start) {
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        adv.inputs(i, j) = lower(i, j) + (upper(i, j) - lower(i, j)) * uniform01(rng);
  }

  for (int t = 0; t < config.steps; ++t) {
    const LossAndGrads lg = loss_and_grads(params, spec, adv);
    const Matrix& g = lg.grads.input_grad;
    if (!g.allFinite()) throw Error("non-finite input gradient during PGD");
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        double v = adv.inputs(i, j) + config.alpha * sign(g(i, j));
        v = std::clamp(v, x(i, j) - config.epsilon, x(i, j) + config.epsilon);
        adv.inputs(i, j) = std::clamp(v, config.lo, config.hi);
      }
    }
  }
  return adv;
}

}  // namespace fedat

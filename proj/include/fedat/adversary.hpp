#pragma once

#include <string>

#include "fedat/nn.hpp"
#include "fedat/rng.hpp"

namespace fedat {

/// PGD threat model: `steps` sign-gradient ascent steps of size `alpha`
/// inside the l-infinity ball of radius `epsilon`, clipped to [lo, hi].
struct AttackConfig {
  int steps = 10;
  double epsilon = 8.0 / 255.0;
  double alpha = 2.0 / 255.0;
  double lo = 0.0;
  double hi = 1.0;
  bool random_start = false;

  void validate() const;
};

/// Parses "8/255", "0.3" or "3/10" into a double. A fraction is evaluated as
/// one IEEE division of the two parsed operands.
double parse_fraction(const std::string& text);

/// Projected gradient ascent on the mean cross-entropy. Labels are copied
/// unchanged. `rng` is only drawn from when random_start is set.
Batch pgd_attack(const ParamVector& params, const ModelSpec& spec, const Batch& batch,
                 const AttackConfig& config, Rng& rng);

}  // namespace fedat

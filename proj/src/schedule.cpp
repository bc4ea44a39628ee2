#include "fedat/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "fedat/types.hpp"

namespace fedat {

void ESchedule::validate() const {
  if (e0 < 1) throw Error("schedule.e0 must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error("schedule.gamma_e must lie in (0, 1]");
  if (freq < 1) throw Error("schedule.freq_e must be >= 1");
}

int epochs_for_round(int round, const ESchedule& schedule) {
  schedule.validate();
  if (round < 0) throw Error("round index must be non-negative");
  const int decays = round / schedule.freq;
  double e = static_cast<double>(schedule.e0);
  for (int i = 0; i < decays && e > 1.0; ++i) e *= schedule.gamma;
  // Absorb accumulated rounding above an integer, e.g. 25.000000000004.
  const double epochs = std::ceil(e - 1e-9);
  return std::max(1, static_cast<int>(epochs));
}

}  // namespace fedat

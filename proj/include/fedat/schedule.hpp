#pragma once

namespace fedat {

/// Local epochs per round. A fixed schedule is gamma = 1 (freq irrelevant).
/// Decaying form: E_t = ceil(e0 * gamma^floor(t / freq)).
struct ESchedule {
  int e0 = 1;
  double gamma = 1.0;
  int freq = 1;

  static ESchedule fixed(int epochs) { return ESchedule{epochs, 1.0, 1}; }
  bool is_fixed() const { return gamma == 1.0; }

  void validate() const;
};

int epochs_for_round(int round, const ESchedule& schedule);

}  // namespace fedat

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace covplan {

struct RewardConfig {
  double coverage = 0.01;  // r_c, per covered cell
  double motion = 0.02;    // r_m, per step
  double crash = 5.0;      // r_s, only charged when the mask level is below invariant
};

// r_c (|C_t| - |C_{t+1}|) - r_m, minus r_s on a crash.
inline double reward(int prev_count, int next_count, bool crashed, const RewardConfig& cfg) {
  double r = cfg.coverage * (prev_count - next_count) - cfg.motion;
  if (crashed) r -= cfg.crash;
  return r;
}

// gamma(s) = 1 - (1 - gamma0) * gamma_r^(s / gamma_s), or a constant.
struct DiscountSchedule {
  enum class Mode { constant, scheduled };

  Mode mode = Mode::scheduled;
  double gamma = 0.99;  // constant mode value
  double gamma0 = 0.99;
  double decay_rate = 0.1;
  double decay_steps = 2e7;

  static DiscountSchedule constant_at(double g) {
    DiscountSchedule s;
    s.mode = Mode::constant;
    s.gamma = g;
    return s;
  }

  void validate() const {
    if (mode == Mode::constant) {
      if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
      return;
    }
    if (!(gamma0 > 0.0 && gamma0 <= 1.0)) throw std::invalid_argument("gamma0 must lie in (0, 1]");
    if (!(decay_rate > 0.0 && decay_rate < 1.0)) throw std::invalid_argument("gamma_r must lie in (0, 1)");
    if (!(decay_steps > 0.0)) throw std::invalid_argument("gamma_s must be positive");
  }
};

inline double discount(std::int64_t step, const DiscountSchedule& s) {
  if (s.mode == DiscountSchedule::Mode::constant) return s.gamma;
  return 1.0 - (1.0 - s.gamma0) * std::pow(s.decay_rate, static_cast<double>(step) / s.decay_steps);
}

}  // namespace covplan

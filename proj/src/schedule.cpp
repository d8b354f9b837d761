#include "hdeid/schedule.hpp"

#include <cmath>
#include <string>

#include "hdeid/errors.hpp"

namespace hdeid {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw ConfigError("noise schedule needs at least one step");
  alpha_bar_.reserve(betas_.size() + 1);
  alpha_bar_.push_back(1.0);
  for (double b : betas_) {
    if (!(b > 0.0 && b < 1.0)) throw ConfigError("beta outside (0, 1): " + std::to_string(b));
    alpha_bar_.push_back(alpha_bar_.back() * (1.0 - b));
  }
}

NoiseSchedule NoiseSchedule::linear(int total_steps, double beta_start, double beta_end) {
  if (total_steps < 1) throw ConfigError("schedule length must be positive");
  std::vector<double> betas(static_cast<std::size_t>(total_steps));
  for (int i = 0; i < total_steps; ++i) {
    const double f = total_steps == 1 ? 0.0 : static_cast<double>(i) / (total_steps - 1);
    betas[static_cast<std::size_t>(i)] = beta_start + f * (beta_end - beta_start);
  }
  return NoiseSchedule(std::move(betas));
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > total_steps()) {
    throw ConfigError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(total_steps()) + "]");
  }
  return alpha_bar_[static_cast<std::size_t>(t)];
}

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::kGuided: return "guided";
    case Phase::kUnconditional: return "unconditional";
    case Phase::kBoost: return "boost";
  }
  return "?";
}

void EditWindow::validate(int schedule_steps) const {
  if (!(t0 > t_edit && t_edit > t_boost && t_boost > 0)) {
    throw ConfigError("edit window needs t0 > t_edit > t_boost > 0 (got " + std::to_string(t0) + ", " +
                      std::to_string(t_edit) + ", " + std::to_string(t_boost) + ")");
  }
  if (t0 > schedule_steps) {
    throw ConfigError("t0 = " + std::to_string(t0) + " exceeds schedule length " + std::to_string(schedule_steps));
  }
  if (n_denoise < 3) throw ConfigError("n_denoise must be >= 3");
  if (n_denoise > t0) throw ConfigError("n_denoise cannot exceed t0");
  if (!(boost_eta >= 0.0 && boost_eta <= 1.0)) throw ConfigError("boost_eta must lie in [0, 1]");
  int counts[3] = {0, 0, 0};
  for (int t : timesteps()) ++counts[static_cast<int>(phase_of(t))];
  for (int p = 0; p < 3; ++p) {
    if (counts[p] == 0) {
      throw ConfigError(std::string("edit window leaves the ") + phase_name(static_cast<Phase>(p)) +
                        " phase without steps; increase n_denoise");
    }
  }
}

std::vector<int> EditWindow::timesteps() const {
  std::vector<int> ts;
  ts.reserve(static_cast<std::size_t>(n_denoise));
  const long long n = n_denoise;
  for (long long k = 1; k <= n; ++k) {
    // round(k * t0 / n), halves rounded up
    ts.push_back(static_cast<int>((2 * k * t0 + n) / (2 * n)));
  }
  return ts;
}

Phase EditWindow::phase_of(int t) const {
  if (t > t_edit) return Phase::kGuided;
  if (t > t_boost) return Phase::kUnconditional;
  return Phase::kBoost;
}

double ddim_sigma(const NoiseSchedule& schedule, int t, int t_prev, double eta) {
  if (eta == 0.0) return 0.0;
  const double ab_t = schedule.alpha_bar(t);
  const double ab_p = schedule.alpha_bar(t_prev);
  return eta * std::sqrt((1.0 - ab_p) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_p);
}

}  // namespace hdeid

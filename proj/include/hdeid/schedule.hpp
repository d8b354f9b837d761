#pragma once

#include <vector>

namespace hdeid {

/// Per-step variances beta_1..beta_T and their cumulative products.
/// Timestep 0 denotes the clean image and has alpha_bar(0) == 1.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(std::vector<double> betas);
  // The 1000-step linear schedule of pixel-space DDPM checkpoints.
  static NoiseSchedule linear(int total_steps = 1000, double beta_start = 1e-4, double beta_end = 0.02);

  int total_steps() const { return static_cast<int>(betas_.size()); }
  double alpha_bar(int t) const;
  const std::vector<double>& betas() const { return betas_; }

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bar_;  // index t, t = 0..T
};

enum class Phase { kGuided, kUnconditional, kBoost };

const char* phase_name(Phase p);

/// Three-phase reverse schedule: h-space injection for t0 >= t > t_edit,
/// unconditional DDIM for t_edit >= t > t_boost, stochastic boost below.
struct EditWindow {
  int t0 = 600;
  int t_edit = 400;
  int t_boost = 200;
  int n_denoise = 16;
  double boost_eta = 1.0;

  // Throws ConfigError unless t0 > t_edit > t_boost > 0, every phase gets at
  // least one step and t0 fits in the schedule.
  void validate(int schedule_steps) const;

  // Visited timesteps t_1 < ... < t_n, spaced uniformly over [0, t0].
  std::vector<int> timesteps() const;
  Phase phase_of(int t) const;
  double eta_of(int t) const { return phase_of(t) == Phase::kBoost ? boost_eta : 0.0; }
};

// DDIM sigma for a step t -> t_prev at stochasticity eta.
double ddim_sigma(const NoiseSchedule& schedule, int t, int t_prev, double eta);

}  // namespace hdeid

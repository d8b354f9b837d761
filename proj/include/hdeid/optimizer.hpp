#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hdeid/losses.hpp"
#include "hdeid/sampler.hpp"

namespace hdeid {

struct OptimizationConfig {
  EditMode mode = EditMode::kLinear;
  double lr = 0.001;
  double lambda = 1000.0;  // linear mode only
  int n_opt = 50;
  double init_norm = 0.1;
  std::uint64_t seed = 1006;
  LossWeights weights;
  EditWindow window;
  bool renormalize = true;  // tangent mode only
  AttributeLossVariant attribute_variant = AttributeLossVariant::kLiteral;
  std::map<std::string, double> attribute_targets;  // name -> fixed probability
  GradientOptions gradient;
  InversionOptions inversion;
  bool record_snapshots = false;
  // Start from this direction instead of a seeded draw (warm starts).
  std::optional<EditDirection> initial_direction;

  void validate(const NoiseSchedule& schedule) const;
  EditSpec edit_spec() const { return {mode, lambda, renormalize}; }
};

/// Standard-normal tensor from `seed`, rescaled to norm m exactly.
EditDirection initialize_direction(const Shape& shape, double m, std::uint64_t seed);

struct TrajectoryRecord {
  int step = 0;
  LossBreakdown loss;
  double norm = 0.0;          // |dh| used for this step's decode
  std::vector<double> z_hat;  // edited anchor, when snapshots are recorded
};

struct TrajectoryLog {
  std::vector<TrajectoryRecord> records;
  std::vector<std::string> events;  // recoverable incidents, e.g. re-randomized directions
};

struct OptimizationResult {
  ImageTensor x_hat;      // decode from the last iteration
  EditDirection dh_final; // direction after the last descent step
  TrajectoryLog log;
};

/// Inverts x once, caches the source features, then runs n_opt rounds of
/// decode -> loss -> plain gradient step.
OptimizationResult optimize(const ImageTensor& x, const OptimizationConfig& config, const NoiseSchedule& schedule,
                            const DenoiserBackend& backend, const OptimizationProviders& providers);

// Delimited text, header "step,total,id,attr,mask,norm", full precision.
void write_trajectory_csv(std::ostream& out, const TrajectoryLog& log);
TrajectoryLog read_trajectory_csv(std::istream& in);

// Binary pool of flattened latents: magic, count, dim (uint64 LE), then
// count * dim float64 values.
void write_snapshots(const std::string& path, const std::vector<std::vector<double>>& snapshots);
std::vector<std::vector<double>> read_snapshots(const std::string& path);
std::vector<std::vector<double>> snapshots_of(const TrajectoryLog& log);

}  // namespace hdeid

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "hdeid/backend.hpp"
#include "hdeid/latent_geometry.hpp"
#include "hdeid/schedule.hpp"
#include "hdeid/tensor.hpp"

namespace hdeid {

enum class EditMode { kLinear, kTangent };

const char* edit_mode_name(EditMode mode);
EditMode parse_edit_mode(const std::string& text);

/// How a shared direction is applied to each guided-step activation.
struct EditSpec {
  EditMode mode = EditMode::kLinear;
  double lambda = 1000.0;  // linear mode only
  bool renormalize = true; // tangent mode only
};

// Edited activation for one guided step. A zero direction is the identity
// edit in both modes (theta = 0 in tangent mode).
LatentTensor apply_edit(const LatentTensor& h, const EditDirection& dh, const EditSpec& spec);
EditGradient apply_edit_vjp(const LatentTensor& h, const EditDirection& dh, const EditSpec& spec,
                            const Tensor& grad_out);

/// Result of inverting an image to depth t0.
struct LatentState {
  Tensor x_T;                         // noised state at t0
  std::vector<int> timesteps;         // visited timesteps, ascending
  std::vector<LatentTensor> h_list;   // unedited bottleneck activation at each visited timestep
  std::vector<Tensor> boost_noise;    // frozen noise per step (empty where sigma == 0)
  double max_refine_residual = 0.0;   // worst fixed-point residual over all steps

  // Latent that edits are measured against: the activation at t0.
  const LatentTensor& anchor() const { return h_list.back(); }
};

struct InversionOptions {
  std::uint64_t noise_seed = 1006;
  // Fixed-point iterations solving each step so the reverse sampler maps back
  // exactly; 0 gives the plain forward DDIM recursion.
  int refine_iterations = 100;
  double refine_tolerance = 1e-13;
};

LatentState ddim_invert(const ImageTensor& x, const NoiseSchedule& schedule, const EditWindow& window,
                        const DenoiserBackend& backend, const InversionOptions& options = {});

/// One reverse step t -> t_prev. When `dh` is set the x0 prediction uses the
/// injected activation while the direction term uses the unconditional
/// prediction. `noise` is required when eta > 0.
Tensor reverse_step(const Tensor& x_t, int t, int t_prev, const EditDirection* dh, const EditSpec& spec,
                    double eta, const NoiseSchedule& schedule, const DenoiserBackend& backend,
                    const Tensor* noise = nullptr);

// Convenience overload that draws the eta > 0 noise from `rng`.
Tensor reverse_step(const Tensor& x_t, int t, int t_prev, const EditDirection* dh, const EditSpec& spec,
                    double eta, const NoiseSchedule& schedule, const DenoiserBackend& backend,
                    std::mt19937_64& rng);

/// Three-phase reverse process from an inverted state. Output clamped to [-1, 1].
ImageTensor denoise_with_edit(const LatentState& state, const EditDirection& dh, const EditSpec& spec,
                              const EditWindow& window, const NoiseSchedule& schedule,
                              const DenoiserBackend& backend);

// Loss evaluated on the decoded image, with its gradient w.r.t. that image.
struct ImageLoss {
  double value = 0.0;
  Tensor grad;
};
using ImageLossFn = std::function<ImageLoss(const ImageTensor&)>;

struct GradientOptions {
  // Keep only every `segment`-th state during the forward pass and recompute
  // the rest while back-propagating.
  bool checkpointed = true;
  std::size_t segment = 0;  // 0 picks ceil(sqrt(steps))
};

struct DirectionGradient {
  ImageTensor x_hat;
  double loss = 0.0;
  EditDirection grad;
  std::size_t stored_states = 0;  // peak number of retained states
};

/// dL/d(dh) through the whole reverse chain.
DirectionGradient compute_gradient(const LatentState& state, const EditDirection& dh, const EditSpec& spec,
                                   const EditWindow& window, const NoiseSchedule& schedule,
                                   const DenoiserBackend& backend, const ImageLossFn& loss,
                                   const GradientOptions& options = {});

}  // namespace hdeid

#pragma once

#include <cstdint>
#include <string>

#include "hdeid/pooling.hpp"
#include "hdeid/registry.hpp"
#include "hdeid/schedule.hpp"
#include "hdeid/tensor.hpp"

namespace hdeid {

struct Prediction {
  Tensor eps;
  LatentTensor h;  // bottleneck (mid-block) activation
};

struct InjectedGradient {
  Tensor grad_x;
  Tensor grad_h;
};

/// Noise predictor with access to its bottleneck activation.
///
/// Adapters for pretrained U-Nets implement the two forward calls plus their
/// vector-Jacobian products; the sampler composes these into end-to-end
/// gradients so no autograd runtime is needed on this side of the interface.
///
/// Contract:
///   - predict(x, t) is deterministic and predict_injected(x, t, predict(x, t).h)
///     returns exactly predict(x, t).eps;
///   - h_shape() is constant across timesteps;
///   - one instance serves one optimization at a time.
class DenoiserBackend {
 public:
  virtual ~DenoiserBackend() = default;

  virtual std::string name() const = 0;
  virtual Shape h_shape() const = 0;

  virtual Prediction predict(const Tensor& x_t, int t) const = 0;
  // Prediction with the bottleneck replaced by `h`.
  virtual Tensor predict_injected(const Tensor& x_t, int t, const LatentTensor& h) const = 0;

  // d<grad_eps, eps> + <grad_h, h> / dx_t for predict(x_t, t). grad_h may be empty.
  virtual Tensor predict_vjp(const Tensor& x_t, int t, const Tensor& grad_eps, const Tensor& grad_h) const = 0;
  virtual InjectedGradient predict_injected_vjp(const Tensor& x_t, int t, const LatentTensor& h,
                                                const Tensor& grad_eps) const = 0;
};

struct ToyDenoiserConfig {
  std::size_t grid = 8;            // pooling grid feeding the bottleneck
  Shape h_shape{4, 4, 4};
  double data_variance = 0.25;     // variance of the implied Gaussian data prior
  double h_scale = 125.0;          // bottleneck magnitude
  double encoder_gain = 1.0;
  double injection_gain = 2e-4;    // how strongly h feeds back into eps
  double noise_gain = 1.0;         // 0 turns the predictor into eps == 0
  bool nonlinear = true;           // tanh bottleneck; false gives a linear predictor
  std::uint64_t seed = 7;
};

/// Analytic stand-in for a pixel-space U-Net.
///
///   f   = block_pool(x_t)
///   h   = h_scale * act(encoder_gain * A f + (t / T) b)
///   eps = noise_gain * k_t * (x_t + injection_gain * up(C h))
///
/// with k_t = sqrt(1 - ab_t) / (ab_t * s^2 + 1 - ab_t), the optimal noise
/// predictor for N(0, s^2) pixels, and A, b, C fixed Gaussian matrices.
class ToyDenoiser final : public DenoiserBackend {
 public:
  ToyDenoiser(NoiseSchedule schedule, ToyDenoiserConfig config = {});

  std::string name() const override { return "toy"; }
  Shape h_shape() const override { return config_.h_shape; }

  Prediction predict(const Tensor& x_t, int t) const override;
  Tensor predict_injected(const Tensor& x_t, int t, const LatentTensor& h) const override;
  Tensor predict_vjp(const Tensor& x_t, int t, const Tensor& grad_eps, const Tensor& grad_h) const override;
  InjectedGradient predict_injected_vjp(const Tensor& x_t, int t, const LatentTensor& h,
                                        const Tensor& grad_eps) const override;

  const ToyDenoiserConfig& config() const { return config_; }

 private:
  double eps_scale(int t) const;
  std::vector<double> pre_activation(const Tensor& x_t, int t) const;
  LatentTensor encode(const std::vector<double>& pre) const;

  NoiseSchedule schedule_;
  ToyDenoiserConfig config_;
  std::size_t h_size_;
  DenseMatrix encoder_;   // h_size x features
  std::vector<double> time_bias_;
  DenseMatrix decoder_;   // features x h_size
};

// Named backends. "toy" accepts the ToyDenoiserConfig fields as options
// (seed, injection_gain, h_scale, nonlinear, ...).
AdapterRegistry<DenoiserBackend, const NoiseSchedule&>& backend_registry();

}  // namespace hdeid

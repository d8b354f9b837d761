#include "hdeid/backend.hpp"

#include <cmath>

#include "hdeid/errors.hpp"
#include "hdeid/pooling.hpp"

namespace hdeid {

ToyDenoiser::ToyDenoiser(NoiseSchedule schedule, ToyDenoiserConfig config)
    : schedule_(std::move(schedule)), config_(std::move(config)), h_size_(shape_size(config_.h_shape)) {
  const std::size_t features = config_.grid * config_.grid * 3;
  encoder_ = DenseMatrix::gaussian(h_size_, features, 1.0 / std::sqrt(static_cast<double>(features)), config_.seed);
  const DenseMatrix bias = DenseMatrix::gaussian(h_size_, 1, 0.5, config_.seed + 1);
  time_bias_ = bias.data;
  decoder_ = DenseMatrix::gaussian(features, h_size_, 1.0 / std::sqrt(static_cast<double>(h_size_)), config_.seed + 2);
}

double ToyDenoiser::eps_scale(int t) const {
  const double ab = schedule_.alpha_bar(t);
  return config_.noise_gain * std::sqrt(1.0 - ab) / (ab * config_.data_variance + 1.0 - ab);
}

std::vector<double> ToyDenoiser::pre_activation(const Tensor& x_t, int t) const {
  std::vector<double> a = encoder_.apply(block_pool(x_t, config_.grid));
  const double tau = static_cast<double>(t) / schedule_.total_steps();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = config_.encoder_gain * a[i] + tau * time_bias_[i];
  return a;
}

LatentTensor ToyDenoiser::encode(const std::vector<double>& pre) const {
  Tensor h(config_.h_shape);
  for (std::size_t i = 0; i < h_size_; ++i) {
    h[i] = config_.h_scale * (config_.nonlinear ? std::tanh(pre[i]) : pre[i]);
  }
  return LatentTensor(std::move(h));
}

Prediction ToyDenoiser::predict(const Tensor& x_t, int t) const {
  LatentTensor h = encode(pre_activation(x_t, t));
  Tensor eps = predict_injected(x_t, t, h);
  return {std::move(eps), std::move(h)};
}

Tensor ToyDenoiser::predict_injected(const Tensor& x_t, int t, const LatentTensor& h) const {
  if (h.shape() != config_.h_shape) {
    throw ShapeError("toy backend: injected h has shape " + shape_string(h.shape()) + ", expected " +
                     shape_string(config_.h_shape));
  }
  const double k = eps_scale(t);
  const Tensor up = block_broadcast(decoder_.apply(h.values()), x_t.shape(), config_.grid);
  Tensor eps(x_t.shape());
  for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = k * (x_t[i] + config_.injection_gain * up[i]);
  return eps;
}

InjectedGradient ToyDenoiser::predict_injected_vjp(const Tensor& x_t, int t, const LatentTensor& h,
                                                   const Tensor& grad_eps) const {
  require_same_shape(x_t, grad_eps, "toy backend vjp");
  if (h.shape() != config_.h_shape) throw ShapeError("toy backend: injected h shape mismatch");
  const double k = eps_scale(t);
  Tensor grad_x = k * Tensor(grad_eps);
  std::vector<double> gh = decoder_.apply_transposed(block_broadcast_adjoint(grad_eps, config_.grid));
  for (double& v : gh) v *= k * config_.injection_gain;
  return {std::move(grad_x), Tensor(config_.h_shape, std::move(gh))};
}

Tensor ToyDenoiser::predict_vjp(const Tensor& x_t, int t, const Tensor& grad_eps, const Tensor& grad_h) const {
  const std::vector<double> pre = pre_activation(x_t, t);
  const LatentTensor h = encode(pre);
  InjectedGradient g = predict_injected_vjp(x_t, t, h, grad_eps);
  if (!grad_h.empty()) {
    if (grad_h.shape() != config_.h_shape) throw ShapeError("toy backend: grad_h shape mismatch");
    g.grad_h += grad_h;
  }
  // Back through h = h_scale * act(encoder_gain * A pool(x) + ...).
  std::vector<double> ga(h_size_);
  for (std::size_t i = 0; i < h_size_; ++i) {
    double d = config_.h_scale * config_.encoder_gain;
    if (config_.nonlinear) {
      const double th = std::tanh(pre[i]);
      d *= 1.0 - th * th;
    }
    ga[i] = g.grad_h[i] * d;
  }
  g.grad_x += block_pool_adjoint(encoder_.apply_transposed(ga), x_t.shape(), config_.grid);
  return std::move(g.grad_x);
}

AdapterRegistry<DenoiserBackend, const NoiseSchedule&>& backend_registry() {
  static auto* registry = [] {
    auto* r = new AdapterRegistry<DenoiserBackend, const NoiseSchedule&>("diffusion backend");
    r->register_adapter("toy", [](const ProviderOptions& o, const NoiseSchedule& schedule) {
      ToyDenoiserConfig c;
      c.seed = option_u64(o, "seed", c.seed);
      c.data_variance = option_double(o, "data_variance", c.data_variance);
      c.h_scale = option_double(o, "h_scale", c.h_scale);
      c.encoder_gain = option_double(o, "encoder_gain", c.encoder_gain);
      c.injection_gain = option_double(o, "injection_gain", c.injection_gain);
      c.noise_gain = option_double(o, "noise_gain", c.noise_gain);
      c.nonlinear = option_bool(o, "nonlinear", c.nonlinear);
      return std::make_unique<ToyDenoiser>(schedule, c);
    });
    return r;
  }();
  return *registry;
}

}  // namespace hdeid

#include "hdeid/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hdeid/errors.hpp"

namespace hdeid {

const char* edit_mode_name(EditMode mode) { return mode == EditMode::kLinear ? "linear" : "tangent"; }

EditMode parse_edit_mode(const std::string& text) {
  if (text == "linear") return EditMode::kLinear;
  if (text == "tangent") return EditMode::kTangent;
  throw ConfigError("unknown edit mode '" + text + "' (expected linear or tangent)");
}

namespace {

bool is_zero(const Tensor& t) {
  return std::all_of(t.flat().begin(), t.flat().end(), [](double v) { return v == 0.0; });
}

// Coefficients of x_prev = a_p * (x_t - s_t * eps_g) / a_t + c * eps_u + sigma * z.
struct StepCoefficients {
  double a_t, s_t, a_p, c, sigma;

  StepCoefficients(const NoiseSchedule& schedule, int t, int t_prev, double eta) {
    if (!(t > t_prev && t_prev >= 0)) {
      throw ConfigError("reverse step needs t > t_prev >= 0 (got " + std::to_string(t) + " -> " +
                        std::to_string(t_prev) + ")");
    }
    const double ab_t = schedule.alpha_bar(t);
    const double ab_p = schedule.alpha_bar(t_prev);
    a_t = std::sqrt(ab_t);
    s_t = std::sqrt(1.0 - ab_t);
    a_p = std::sqrt(ab_p);
    sigma = ddim_sigma(schedule, t, t_prev, eta);
    c = std::sqrt(std::max(0.0, 1.0 - ab_p - sigma * sigma));
  }
};

Tensor combine(const Tensor& x_t, const Tensor& eps_guided, const Tensor& eps_uncond, const StepCoefficients& k,
               const Tensor* noise) {
  Tensor out(x_t.shape());
  const double r = k.a_p / k.a_t;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = r * (x_t[i] - k.s_t * eps_guided[i]) + k.c * eps_uncond[i];
  }
  if (k.sigma > 0.0) {
    if (noise == nullptr) throw ConfigError("stochastic reverse step needs a noise tensor");
    axpy(k.sigma, *noise, out);
  }
  return out;
}

Tensor gaussian_like(const Shape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor z(shape);
  for (double& v : z.flat()) v = normal(rng);
  return z;
}

// The reverse chain for one (state, direction) pair. State j holds the sample
// at timestep T_j with T_n = t0 and T_0 = 0; step j maps state j to j - 1.
class ReverseChain {
 public:
  ReverseChain(const LatentState& state, const EditDirection& dh, const EditSpec& spec, const EditWindow& window,
               const NoiseSchedule& schedule, const DenoiserBackend& backend)
      : state_(state), dh_(dh), spec_(spec), window_(window), schedule_(schedule), backend_(backend) {
    if (state.timesteps.empty() || state.h_list.size() != state.timesteps.size() ||
        state.boost_noise.size() != state.timesteps.size()) {
      throw ConfigError("latent state is incomplete");
    }
    if (state.timesteps != window.timesteps()) {
      throw ConfigError("latent state was inverted with a different edit window");
    }
    if (dh.shape() != backend.h_shape()) {
      throw ShapeError("edit direction shape " + shape_string(dh.shape()) + " does not match backend h shape " +
                       shape_string(backend.h_shape()));
    }
  }

  std::size_t steps() const { return state_.timesteps.size(); }
  int timestep(std::size_t j) const { return j == 0 ? 0 : state_.timesteps[j - 1]; }

  Tensor forward(const Tensor& x, std::size_t j) const {
    const int t = timestep(j);
    const int p = timestep(j - 1);
    const bool guided = window_.phase_of(t) == Phase::kGuided;
    Tensor out = reverse_step(x, t, p, guided ? &dh_ : nullptr, spec_, window_.eta_of(t), schedule_, backend_,
                              noise(j));
    if (!out.all_finite()) {
      throw NumericalError("non-finite sample after reverse step at timestep " + std::to_string(t),
                           static_cast<int>(j - 1));
    }
    return out;
  }

  // Returns dL/dx for state j given dL/d(state j-1); accumulates dL/d(dh).
  Tensor backward(const Tensor& x, std::size_t j, const Tensor& grad_prev, Tensor& grad_dh) const {
    const int t = timestep(j);
    const int p = timestep(j - 1);
    const StepCoefficients k(schedule_, t, p, window_.eta_of(t));
    const double r = k.a_p / k.a_t;
    Tensor grad_x = r * Tensor(grad_prev);
    if (window_.phase_of(t) != Phase::kGuided) {
      grad_x += backend_.predict_vjp(x, t, (k.c - r * k.s_t) * Tensor(grad_prev), Tensor());
    } else {
      const Prediction pred = backend_.predict(x, t);
      const LatentTensor edited = apply_edit(pred.h, dh_, spec_);
      InjectedGradient inj = backend_.predict_injected_vjp(x, t, edited, (-r * k.s_t) * Tensor(grad_prev));
      EditGradient eg = apply_edit_vjp(pred.h, dh_, spec_, inj.grad_h);
      grad_dh += eg.grad_dh;
      grad_x += inj.grad_x;
      grad_x += backend_.predict_vjp(x, t, k.c * Tensor(grad_prev), eg.grad_z);
    }
    if (!grad_x.all_finite() || !grad_dh.all_finite()) {
      throw NumericalError("non-finite gradient at timestep " + std::to_string(t), static_cast<int>(j - 1));
    }
    return grad_x;
  }

 private:
  const Tensor* noise(std::size_t j) const {
    const Tensor& z = state_.boost_noise[j - 1];
    return z.empty() ? nullptr : &z;
  }

  const LatentState& state_;
  const EditDirection& dh_;
  const EditSpec& spec_;
  const EditWindow& window_;
  const NoiseSchedule& schedule_;
  const DenoiserBackend& backend_;
};

}  // namespace

LatentTensor apply_edit(const LatentTensor& h, const EditDirection& dh, const EditSpec& spec) {
  if (spec.mode == EditMode::kLinear) return linear_edit(h, dh, spec.lambda);
  require_same_shape(h, dh, "apply_edit");
  if (is_zero(dh)) return h;
  return tangent_edit(h, dh, spec.renormalize);
}

EditGradient apply_edit_vjp(const LatentTensor& h, const EditDirection& dh, const EditSpec& spec,
                            const Tensor& grad_out) {
  if (spec.mode == EditMode::kLinear) return linear_edit_vjp(h, dh, spec.lambda, grad_out);
  if (is_zero(dh)) return {grad_out, Tensor(dh.shape())};
  return tangent_edit_vjp(h, dh, spec.renormalize, grad_out);
}

Tensor reverse_step(const Tensor& x_t, int t, int t_prev, const EditDirection* dh, const EditSpec& spec,
                    double eta, const NoiseSchedule& schedule, const DenoiserBackend& backend,
                    const Tensor* noise) {
  const StepCoefficients k(schedule, t, t_prev, eta);
  Prediction pred = backend.predict(x_t, t);
  if (dh == nullptr) return combine(x_t, pred.eps, pred.eps, k, noise);
  if (dh->shape() != pred.h.shape()) {
    throw ShapeError("edit direction shape " + shape_string(dh->shape()) + " does not match h shape " +
                     shape_string(pred.h.shape()));
  }
  const Tensor eps_guided = backend.predict_injected(x_t, t, apply_edit(pred.h, *dh, spec));
  return combine(x_t, eps_guided, pred.eps, k, noise);
}

Tensor reverse_step(const Tensor& x_t, int t, int t_prev, const EditDirection* dh, const EditSpec& spec,
                    double eta, const NoiseSchedule& schedule, const DenoiserBackend& backend,
                    std::mt19937_64& rng) {
  if (eta == 0.0) return reverse_step(x_t, t, t_prev, dh, spec, eta, schedule, backend, nullptr);
  const Tensor z = gaussian_like(x_t.shape(), rng);
  return reverse_step(x_t, t, t_prev, dh, spec, eta, schedule, backend, &z);
}

LatentState ddim_invert(const ImageTensor& x, const NoiseSchedule& schedule, const EditWindow& window,
                        const DenoiserBackend& backend, const InversionOptions& options) {
  window.validate(schedule.total_steps());
  if (!x.all_finite()) throw NumericalError("input image has non-finite values");

  LatentState state;
  state.timesteps = window.timesteps();
  const std::size_t n = state.timesteps.size();
  std::mt19937_64 rng(options.noise_seed);
  state.boost_noise.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const int t = state.timesteps[k];
    const int p = k == 0 ? 0 : state.timesteps[k - 1];
    if (ddim_sigma(schedule, t, p, window.eta_of(t)) > 0.0) state.boost_noise[k] = gaussian_like(x.shape(), rng);
  }

  Tensor x_prev = x;
  for (std::size_t k = 0; k < n; ++k) {
    const int t = state.timesteps[k];
    const int p = k == 0 ? 0 : state.timesteps[k - 1];
    const StepCoefficients c(schedule, t, p, window.eta_of(t));
    const Tensor& z = state.boost_noise[k];
    const double r = c.a_t / c.a_p;

    // Solve a_p (x_t - s_t eps(x_t)) / a_t + c eps(x_t) + sigma z = x_prev for x_t.
    auto solve = [&](const Tensor& eps) {
      Tensor next(x_prev.shape());
      for (std::size_t i = 0; i < next.size(); ++i) {
        const double noise = z.empty() ? 0.0 : c.sigma * z[i];
        next[i] = r * (x_prev[i] - c.c * eps[i] - noise) + c.s_t * eps[i];
      }
      return next;
    };

    Tensor x_t = solve(backend.predict(x_prev, p).eps);
    double residual = 0.0;
    for (int it = 0; it < options.refine_iterations; ++it) {
      Tensor next = solve(backend.predict(x_t, t).eps);
      residual = max_abs_diff(next, x_t);
      x_t = std::move(next);
      if (!x_t.all_finite()) break;
      if (residual < options.refine_tolerance) break;
    }
    if (!x_t.all_finite()) {
      throw NumericalError("non-finite state during inversion at timestep " + std::to_string(t),
                           static_cast<int>(k));
    }
    state.max_refine_residual = std::max(state.max_refine_residual, residual);
    state.h_list.push_back(backend.predict(x_t, t).h);
    x_prev = std::move(x_t);
  }
  state.x_T = std::move(x_prev);
  return state;
}

ImageTensor denoise_with_edit(const LatentState& state, const EditDirection& dh, const EditSpec& spec,
                              const EditWindow& window, const NoiseSchedule& schedule,
                              const DenoiserBackend& backend) {
  const ReverseChain chain(state, dh, spec, window, schedule, backend);
  Tensor x = state.x_T;
  for (std::size_t j = chain.steps(); j >= 1; --j) x = chain.forward(x, j);
  ImageTensor out(std::move(x));
  out.clamp_range();
  return out;
}

DirectionGradient compute_gradient(const LatentState& state, const EditDirection& dh, const EditSpec& spec,
                                   const EditWindow& window, const NoiseSchedule& schedule,
                                   const DenoiserBackend& backend, const ImageLossFn& loss,
                                   const GradientOptions& options) {
  const ReverseChain chain(state, dh, spec, window, schedule, backend);
  const std::size_t n = chain.steps();
  std::size_t segment = options.segment;
  if (segment == 0) segment = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  if (!options.checkpointed) segment = 1;

  // Forward pass: states[j] is kept for every checkpoint j.
  std::vector<Tensor> states(n + 1);
  std::vector<std::size_t> checkpoints;
  Tensor x = state.x_T;
  for (std::size_t j = n; j >= 1; --j) {
    if ((n - j) % segment == 0) {
      states[j] = x;
      checkpoints.push_back(j);
    }
    x = chain.forward(x, j);
  }
  const Tensor x0 = x;
  ImageTensor x_hat(x);
  x_hat.clamp_range();

  DirectionGradient result;
  ImageLoss l = loss(x_hat);
  require_same_shape(l.grad, x_hat, "loss gradient");
  result.loss = l.value;
  result.stored_states = checkpoints.size();

  Tensor grad = std::move(l.grad);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (std::abs(x0[i]) > 1.0) grad[i] = 0.0;  // clamp
  }
  Tensor grad_dh(dh.shape());

  // Backward, lowest segment first. Segment [lo + 1, hi] starts at checkpoint hi.
  std::sort(checkpoints.begin(), checkpoints.end());
  std::size_t lo = 0;
  for (std::size_t hi : checkpoints) {
    if (options.checkpointed) {
      for (std::size_t j = hi; j > lo + 1; --j) states[j - 1] = chain.forward(states[j], j);
      result.stored_states = std::max(result.stored_states, checkpoints.size() + (hi - lo - 1));
    }
    for (std::size_t j = lo + 1; j <= hi; ++j) grad = chain.backward(states[j], j, grad, grad_dh);
    if (options.checkpointed) {
      for (std::size_t j = lo + 1; j < hi; ++j) states[j] = Tensor();
    }
    lo = hi;
  }

  result.x_hat = std::move(x_hat);
  result.grad = EditDirection(std::move(grad_dh));
  return result;
}

}  // namespace hdeid

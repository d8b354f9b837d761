#include <gtest/gtest.h>

#include <cmath>

#include "hdeid/errors.hpp"
#include "hdeid/optimizer.hpp"
#include "hdeid/sampler.hpp"
#include "test_support.hpp"

using namespace hdeid;
using hdeid::testing::random_like;
using hdeid::testing::synthetic_image;
using hdeid::testing::ToyPipeline;

namespace {

ToyDenoiserConfig zero_eps() {
  ToyDenoiserConfig c;
  c.noise_gain = 0.0;
  return c;
}

EditDirection zero_dir(const DenoiserBackend& be) { return EditDirection(Tensor(be.h_shape())); }

}  // namespace

TEST(ReverseStep, ZeroPredictorClosedForm) {
  ToyPipeline p(zero_eps());
  const ImageTensor x = synthetic_image(16, 1);
  const Tensor out = reverse_step(x, 500, 300, nullptr, {}, 0.0, p.schedule, p.backend);
  const double r = std::sqrt(p.schedule.alpha_bar(300) / p.schedule.alpha_bar(500));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(out[i], r * x[i], 1e-14);
}

TEST(ReverseStep, ZeroDirectionEqualsPlainStep) {
  ToyPipeline p;
  const ImageTensor x = synthetic_image(16, 2);
  const EditDirection z = zero_dir(p.backend);
  for (EditMode m : {EditMode::kLinear, EditMode::kTangent}) {
    EditSpec spec;
    spec.mode = m;
    EXPECT_EQ(reverse_step(x, 600, 525, &z, spec, 0.0, p.schedule, p.backend),
              reverse_step(x, 600, 525, nullptr, spec, 0.0, p.schedule, p.backend));
  }
}

TEST(ReverseStep, SeededNoiseIsReproducible) {
  ToyPipeline p;
  const ImageTensor x = synthetic_image(16, 3);
  std::mt19937_64 a(1006), b(1006);
  const Tensor ra = reverse_step(x, 150, 75, nullptr, {}, 1.0, p.schedule, p.backend, a);
  const Tensor rb = reverse_step(x, 150, 75, nullptr, {}, 1.0, p.schedule, p.backend, b);
  EXPECT_EQ(ra, rb);
  EXPECT_NE(ra, reverse_step(x, 150, 75, nullptr, {}, 0.0, p.schedule, p.backend));
}

TEST(ReverseStep, Errors) {
  ToyPipeline p;
  const ImageTensor x = synthetic_image(16, 3);
  const EditDirection bad(Tensor(Shape{5}));
  EXPECT_THROW(reverse_step(x, 600, 525, &bad, {}, 0.0, p.schedule, p.backend), ShapeError);
  EXPECT_THROW(reverse_step(x, 300, 300, nullptr, {}, 0.0, p.schedule, p.backend), ConfigError);
  EXPECT_THROW(reverse_step(x, 150, 75, nullptr, {}, 1.0, p.schedule, p.backend, nullptr), ConfigError);
}

TEST(Inversion, ZeroPredictorIsPureScaling) {
  ToyPipeline p(zero_eps(), 16);
  p.window.boost_eta = 0.0;
  const ImageTensor x = synthetic_image(16, 4);
  const LatentState s = ddim_invert(x, p.schedule, p.window, p.backend);
  const double a = std::sqrt(p.schedule.alpha_bar(600));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(s.x_T[i], a * x[i], 1e-13);
}

TEST(Inversion, VisitsSixteenIncreasingTimesteps) {
  ToyPipeline p({}, 16);
  const LatentState s = ddim_invert(synthetic_image(16, 5), p.schedule, p.window, p.backend);
  ASSERT_EQ(s.timesteps.size(), 16u);
  ASSERT_EQ(s.h_list.size(), 16u);
  for (std::size_t i = 1; i < s.timesteps.size(); ++i) EXPECT_LT(s.timesteps[i - 1], s.timesteps[i]);
  EXPECT_EQ(s.timesteps.back(), 600);
  // Noise is frozen only for the stochastic steps that actually add noise.
  for (std::size_t k = 0; k < 16; ++k) {
    const int t = s.timesteps[k];
    const bool noisy = p.window.phase_of(t) == Phase::kBoost && k > 0;
    EXPECT_EQ(!s.boost_noise[k].empty(), noisy) << "t=" << t;
  }
}

TEST(Inversion, RejectsNonFiniteInput) {
  ToyPipeline p;
  ImageTensor x = synthetic_image(16, 6);
  x[3] = std::nan("");
  EXPECT_THROW(ddim_invert(x, p.schedule, p.window, p.backend), NumericalError);
}

class RoundTrip : public ::testing::TestWithParam<std::tuple<bool, int>> {};

TEST_P(RoundTrip, ZeroDirectionReconstructs) {
  ToyDenoiserConfig c;
  c.nonlinear = std::get<0>(GetParam());
  ToyPipeline p(c, std::get<1>(GetParam()));
  const ImageTensor x = synthetic_image(32, 7);
  const LatentState s = ddim_invert(x, p.schedule, p.window, p.backend);
  EXPECT_LT(s.max_refine_residual, 1e-10);
  for (EditMode m : {EditMode::kLinear, EditMode::kTangent}) {
    EditSpec spec;
    spec.mode = m;
    const ImageTensor r = denoise_with_edit(s, zero_dir(p.backend), spec, p.window, p.schedule, p.backend);
    EXPECT_LT(max_abs_diff(r, x), 1e-4);
  }
}

INSTANTIATE_TEST_SUITE_P(Backends, RoundTrip,
                         ::testing::Combine(::testing::Values(true, false), ::testing::Values(8, 16)));

TEST(Denoise, LinearEditChangesTheFace) {
  ToyPipeline p({}, 16);
  const ImageTensor x = synthetic_image(32, 8);
  const LatentState s = ddim_invert(x, p.schedule, p.window, p.backend);
  const EditDirection d = initialize_direction(p.backend.h_shape(), 0.1, 1006);
  const ImageTensor r = denoise_with_edit(s, d, {}, p.window, p.schedule, p.backend);
  const FaceMask m = p.parser.parse(x);
  double face_change = 0.0;
  for (std::size_t px = 0; px < m.size(); ++px) {
    for (std::size_t c = 0; c < 3; ++c) face_change += m[px] * std::abs(r[px * 3 + c] - x[px * 3 + c]);
  }
  EXPECT_GT(face_change, 1e-3);
  for (double v : r.flat()) {
    EXPECT_LE(v, 1.0);
    EXPECT_GE(v, -1.0);
  }
}

TEST(Denoise, RejectsMismatchedState) {
  ToyPipeline p({}, 8);
  const LatentState s = ddim_invert(synthetic_image(16, 9), p.schedule, p.window, p.backend);
  EditWindow other = p.window;
  other.n_denoise = 9;
  EXPECT_THROW(denoise_with_edit(s, zero_dir(p.backend), {}, other, p.schedule, p.backend), ConfigError);
}

// End-to-end gradient through the chain against central differences.
class ChainGradient : public ::testing::TestWithParam<EditMode> {};

TEST_P(ChainGradient, MatchesFiniteDifferencesAndCheckpointing) {
  ToyPipeline p({}, 8);
  const ImageTensor x = synthetic_image(32, 10);
  const LatentState s = ddim_invert(x, p.schedule, p.window, p.backend);
  const SourceFeatures src = extract_source_features(x, p.providers());
  auto loss = [&](const ImageTensor& xh) {
    TotalLoss t = total_loss(src, xh, p.providers(), {});
    return ImageLoss{t.terms.total, std::move(t.grad)};
  };
  EditSpec spec;
  spec.mode = GetParam();
  const EditDirection d = initialize_direction(p.backend.h_shape(), 0.1, 1006);

  GradientOptions stored;
  stored.checkpointed = false;
  const DirectionGradient g = compute_gradient(s, d, spec, p.window, p.schedule, p.backend, loss, stored);
  EXPECT_EQ(g.stored_states, 8u);
  EXPECT_EQ(g.x_hat, denoise_with_edit(s, d, spec, p.window, p.schedule, p.backend));

  for (std::size_t seg : {0u, 2u, 3u, 5u, 8u}) {
    GradientOptions ck;
    ck.segment = seg;
    const DirectionGradient gc = compute_gradient(s, d, spec, p.window, p.schedule, p.backend, loss, ck);
    EXPECT_LE(max_abs_diff(gc.grad, g.grad), 1e-6) << "segment " << seg;
    EXPECT_EQ(gc.loss, g.loss);
  }

  const double step = 1e-5;
  std::mt19937_64 rng(77);
  for (int k = 0; k < 12; ++k) {
    const std::size_t i = rng() % d.size();
    EditDirection a = d, b = d;
    a[i] += step;
    b[i] -= step;
    const double fd = (loss(denoise_with_edit(s, a, spec, p.window, p.schedule, p.backend)).value -
                       loss(denoise_with_edit(s, b, spec, p.window, p.schedule, p.backend)).value) /
                      (2 * step);
    const double rel = std::abs(fd - g.grad[i]) / std::max(std::abs(fd), std::abs(g.grad[i]));
    EXPECT_LT(rel, 1e-4) << "coordinate " << i << " analytic " << g.grad[i] << " fd " << fd;
  }
}

INSTANTIATE_TEST_SUITE_P(Modes, ChainGradient, ::testing::Values(EditMode::kLinear, EditMode::kTangent));

TEST(ChainGradient, ConstantLossGivesZeroGradient) {
  ToyPipeline p({}, 8);
  const LatentState s = ddim_invert(synthetic_image(16, 11), p.schedule, p.window, p.backend);
  auto loss = [](const ImageTensor& xh) { return ImageLoss{3.0, Tensor(xh.shape())}; };
  const EditDirection d = initialize_direction(p.backend.h_shape(), 0.1, 3);
  const DirectionGradient g = compute_gradient(s, d, {}, p.window, p.schedule, p.backend, loss);
  EXPECT_EQ(g.loss, 3.0);
  for (double v : g.grad.flat()) EXPECT_EQ(v, 0.0);
}

TEST(ChainGradient, NonFiniteGradientNamesTheStep) {
  ToyPipeline p({}, 8);
  const LatentState s = ddim_invert(synthetic_image(16, 12), p.schedule, p.window, p.backend);
  auto loss = [](const ImageTensor& xh) { return ImageLoss{0.0, Tensor(xh.shape(), std::nan(""))}; };
  const EditDirection d = initialize_direction(p.backend.h_shape(), 0.1, 3);
  try {
    compute_gradient(s, d, {}, p.window, p.schedule, p.backend, loss);
    FAIL() << "expected a numerical error";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.step_index(), 0);
  }
}

TEST(ApplyEdit, ModesAndZeroDirection) {
  const LatentTensor h(Tensor::from_values({3, 4}));
  const EditDirection zero(Tensor::from_values({0, 0}));
  EditSpec tangent;
  tangent.mode = EditMode::kTangent;
  EXPECT_EQ(apply_edit(h, zero, tangent), h);
  const EditGradient g = apply_edit_vjp(h, zero, tangent, Tensor::from_values({1, 2}));
  EXPECT_EQ(g.grad_z, Tensor::from_values({1, 2}));
  EXPECT_EQ(g.grad_dh, Tensor::from_values({0, 0}));
  EditSpec linear;
  linear.lambda = 10.0;
  EXPECT_EQ(apply_edit(h, EditDirection(Tensor::from_values({1, 0})), linear), Tensor::from_values({13, 4}));
  EXPECT_EQ(parse_edit_mode("tangent"), EditMode::kTangent);
  EXPECT_THROW(parse_edit_mode("slerp"), ConfigError);
}

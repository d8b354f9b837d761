#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "hdeid/attributes.hpp"
#include "hdeid/errors.hpp"
#include "hdeid/optimizer.hpp"
#include "test_support.hpp"

using namespace hdeid;
using hdeid::testing::synthetic_image;
using hdeid::testing::ToyPipeline;

TEST(InitializeDirection, NormAndSeeding) {
  const Shape shape{4, 4, 4};
  const EditDirection a = initialize_direction(shape, 0.1, 1006);
  EXPECT_EQ(a.shape(), shape);
  EXPECT_NEAR(norm(a), 0.1, 1e-9);
  EXPECT_EQ(a, initialize_direction(shape, 0.1, 1006));
  EXPECT_NE(a, initialize_direction(shape, 0.1, 1007));
  EXPECT_NEAR(norm(initialize_direction(Shape{512}, 2.5, 1)), 2.5, 1e-9);
  EXPECT_THROW(initialize_direction(shape, 0.0, 1), ConfigError);
}

TEST(AttributeTargets, Overrides) {
  std::vector<double> base(40);
  for (std::size_t i = 0; i < 40; ++i) base[i] = 0.1 + 0.02 * static_cast<double>(i);
  const AttributeDistribution a(base);
  EXPECT_EQ(set_attribute_targets(a, {}), a);

  const AttributeDistribution smile = set_attribute_targets(a, {{"Smile", 0.9}});
  const std::size_t si = attribute_index("Smiling");
  EXPECT_EQ(smile[si], 0.9);
  int changed = 0;
  for (std::size_t i = 0; i < 40; ++i) changed += smile[i] != a[i];
  EXPECT_EQ(changed, 1);

  const AttributeDistribution two = set_attribute_targets(a, {{"Male", 0.1}, {"Narrow Eyes", 0.9}});
  changed = 0;
  for (std::size_t i = 0; i < 40; ++i) changed += two[i] != a[i];
  EXPECT_EQ(changed, 2);
  EXPECT_EQ(two[attribute_index("Narrow_Eyes")], 0.9);
  EXPECT_EQ(two[attribute_index("male")], 0.1);
}

TEST(AttributeTargets, Errors) {
  const AttributeDistribution a(std::vector<double>(40, 0.5));
  try {
    set_attribute_targets(a, {{"Freckles", 0.5}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("Wearing_Hat"), std::string::npos);
  }
  EXPECT_THROW(set_attribute_targets(a, {{"Smile", 1.0}}), ConfigError);
  EXPECT_THROW(set_attribute_targets(a, {{"Smile", 0.0}}), ConfigError);
  EXPECT_THROW(set_attribute_targets(AttributeDistribution({0.5}), {{"Smile", 0.5}}), ShapeError);
  EXPECT_EQ(celeba_attribute_names().size(), 40u);
  EXPECT_EQ(attribute_index("Mouth Slightly Open"), attribute_index("Mouth_Slightly_Open"));
}

namespace {

OptimizationConfig small_config(EditMode mode, int n_opt, std::uint64_t seed = 1006) {
  OptimizationConfig c;
  c.mode = mode;
  c.n_opt = n_opt;
  c.seed = seed;
  c.window.n_denoise = 8;
  return c;
}

}  // namespace

TEST(Optimize, SingleStepIsOneDecodeOfTheInitialDirection) {
  ToyPipeline p({}, 8);
  const ImageTensor x = synthetic_image(32, 1);
  const OptimizationConfig c = small_config(EditMode::kLinear, 1);
  const OptimizationResult r = optimize(x, c, p.schedule, p.backend, p.providers());
  ASSERT_EQ(r.log.records.size(), 1u);
  const LatentState s = ddim_invert(x, p.schedule, c.window, p.backend);
  const EditDirection d0 = initialize_direction(p.backend.h_shape(), c.init_norm, c.seed);
  EXPECT_EQ(r.x_hat, denoise_with_edit(s, d0, c.edit_spec(), c.window, p.schedule, p.backend));
  EXPECT_NEAR(r.log.records[0].norm, 0.1, 1e-12);
  EXPECT_NE(r.dh_final, d0);
}

class OptimizeModes : public ::testing::TestWithParam<EditMode> {};

TEST_P(OptimizeModes, DescendsAndLogsEveryStep) {
  ToyPipeline p({}, 8);
  const ImageTensor x = synthetic_image(32, 2);
  OptimizationConfig c = small_config(GetParam(), 10);
  c.record_snapshots = true;
  const OptimizationResult r = optimize(x, c, p.schedule, p.backend, p.providers());
  ASSERT_EQ(r.log.records.size(), 10u);
  for (std::size_t i = 0; i < r.log.records.size(); ++i) {
    const auto& rec = r.log.records[i];
    EXPECT_EQ(rec.step, static_cast<int>(i));
    EXPECT_NEAR(rec.loss.total, rec.loss.id + rec.loss.attr + 0.5 * rec.loss.mask, 1e-9);
    EXPECT_EQ(rec.z_hat.size(), 64u);
  }
  EXPECT_LT(r.log.records.back().loss.total, r.log.records.front().loss.total);
  EXPECT_TRUE(r.log.events.empty());
  if (GetParam() == EditMode::kTangent) {
    // Snapshots stay on the sphere of the anchor.
    const LatentState s = ddim_invert(x, p.schedule, c.window, p.backend);
    for (const auto& rec : r.log.records) {
      EXPECT_NEAR(norm(rec.z_hat), norm(s.anchor()), 1e-9 * norm(s.anchor()));
    }
  }
}

TEST_P(OptimizeModes, BitReproducible) {
  ToyPipeline p({}, 8);
  const ImageTensor x = synthetic_image(32, 3);
  const OptimizationConfig c = small_config(GetParam(), 4);
  const OptimizationResult a = optimize(x, c, p.schedule, p.backend, p.providers());
  const OptimizationResult b = optimize(x, c, p.schedule, p.backend, p.providers());
  EXPECT_EQ(a.x_hat, b.x_hat);
  EXPECT_EQ(a.dh_final, b.dh_final);
  std::ostringstream la, lb;
  write_trajectory_csv(la, a.log);
  write_trajectory_csv(lb, b.log);
  EXPECT_EQ(la.str(), lb.str());
}

INSTANTIATE_TEST_SUITE_P(Modes, OptimizeModes, ::testing::Values(EditMode::kLinear, EditMode::kTangent));

TEST(Optimize, TangentModeNeverReadsLambda) {
  ToyPipeline p({}, 8);
  const ImageTensor x = synthetic_image(32, 4);
  OptimizationConfig a = small_config(EditMode::kTangent, 2);
  OptimizationConfig b = a;
  b.lambda = 12345.0;
  EXPECT_EQ(optimize(x, a, p.schedule, p.backend, p.providers()).x_hat,
            optimize(x, b, p.schedule, p.backend, p.providers()).x_hat);
}

TEST(Optimize, AttributeTargetsChangeTheObjective) {
  ToyPipeline p({}, 8);
  const ImageTensor x = synthetic_image(32, 5);
  OptimizationConfig a = small_config(EditMode::kLinear, 1);
  OptimizationConfig b = a;
  b.attribute_targets = {{"Smile", 0.9}};
  const auto ra = optimize(x, a, p.schedule, p.backend, p.providers());
  const auto rb = optimize(x, b, p.schedule, p.backend, p.providers());
  EXPECT_NE(ra.log.records[0].loss.attr, rb.log.records[0].loss.attr);
  b.attribute_targets = {{"Sunglasses", 0.9}};
  EXPECT_THROW(optimize(x, b, p.schedule, p.backend, p.providers()), ConfigError);
}

TEST(Optimize, ConfigValidation) {
  ToyPipeline p({}, 8);
  const ImageTensor x = synthetic_image(16, 6);
  OptimizationConfig c = small_config(EditMode::kLinear, 0);
  EXPECT_THROW(optimize(x, c, p.schedule, p.backend, p.providers()), ConfigError);
  c = small_config(EditMode::kLinear, 1);
  c.lr = -1.0;
  EXPECT_THROW(optimize(x, c, p.schedule, p.backend, p.providers()), ConfigError);
  c = small_config(EditMode::kLinear, 1);
  c.init_norm = 0.0;
  EXPECT_THROW(optimize(x, c, p.schedule, p.backend, p.providers()), ConfigError);
}

namespace {

// Backend whose activation is a fixed vector, so a direction along it is
// exactly parallel at every guided step.
class FixedActivation final : public DenoiserBackend {
 public:
  explicit FixedActivation(const NoiseSchedule& s) : inner_(s) {}
  std::string name() const override { return "fixed"; }
  Shape h_shape() const override { return inner_.h_shape(); }
  Prediction predict(const Tensor& x, int t) const override { return {inner_.predict_injected(x, t, h()), h()}; }
  Tensor predict_injected(const Tensor& x, int t, const LatentTensor& hh) const override {
    return inner_.predict_injected(x, t, hh);
  }
  Tensor predict_vjp(const Tensor& x, int t, const Tensor& ge, const Tensor&) const override {
    return inner_.predict_injected_vjp(x, t, h(), ge).grad_x;
  }
  InjectedGradient predict_injected_vjp(const Tensor& x, int t, const LatentTensor& hh,
                                        const Tensor& ge) const override {
    return inner_.predict_injected_vjp(x, t, hh, ge);
  }
  static LatentTensor h() { return LatentTensor(Tensor(Shape{4, 4, 4}, 50.0)); }

 private:
  ToyDenoiser inner_;
};

}  // namespace

TEST(Optimize, DegenerateTangentDirectionIsRerandomized) {
  ToyPipeline p({}, 8);
  const FixedActivation be(p.schedule);
  const ImageTensor x = synthetic_image(32, 7);
  OptimizationConfig c = small_config(EditMode::kTangent, 3);
  const EditDirection parallel(Tensor(Shape{4, 4, 4}, 0.1 / 8.0));
  const LatentState s = ddim_invert(x, p.schedule, c.window, be);
  EXPECT_THROW(compute_gradient(s, parallel, c.edit_spec(), c.window, p.schedule, be,
                                [](const ImageTensor& xh) { return ImageLoss{0.0, Tensor(xh.shape())}; }),
               DegenerateDirectionError);

  c.initial_direction = parallel;
  const OptimizationResult r = optimize(x, c, p.schedule, be, p.providers());
  EXPECT_EQ(r.log.records.size(), 3u);
  ASSERT_EQ(r.log.events.size(), 1u);
  EXPECT_NE(r.log.events[0].find("parallel"), std::string::npos);
  EXPECT_GT(std::abs(r.log.records[0].norm - 0.1), 0.0);
}

TEST(TrajectoryLog, CsvRoundTrip) {
  TrajectoryLog log;
  log.records.push_back({0, {2.7, 0.5, 0.2, 4.0}, 0.1, {}});
  log.records.push_back({1, {1.0 / 3.0, 1e-300, -0.25, 12.5}, 0.123456789012345678, {}});
  std::stringstream ss;
  write_trajectory_csv(ss, log);
  EXPECT_EQ(ss.str().substr(0, 30), "step,total,id,attr,mask,norm\n0");
  const TrajectoryLog back = read_trajectory_csv(ss);
  ASSERT_EQ(back.records.size(), 2u);
  EXPECT_EQ(back.records[1].loss.total, 1.0 / 3.0);
  EXPECT_EQ(back.records[1].loss.id, 1e-300);
  EXPECT_EQ(back.records[1].norm, 0.123456789012345678);
  std::stringstream bad("step,total\n");
  EXPECT_THROW(read_trajectory_csv(bad), ConfigError);
}

TEST(TrajectoryLog, SnapshotFileRoundTrip) {
  const std::string path = (std::filesystem::temp_directory_path() / "hdeid_snapshots_test.bin").string();
  const std::vector<std::vector<double>> snaps{{1.0, -2.5, 1e-17}, {0.1, 0.2, 0.3}};
  write_snapshots(path, snaps);
  EXPECT_EQ(read_snapshots(path), snaps);
  EXPECT_THROW(write_snapshots(path, {{1.0}, {1.0, 2.0}}), ShapeError);
  std::filesystem::remove(path);
  EXPECT_THROW(read_snapshots(path), ConfigError);
}

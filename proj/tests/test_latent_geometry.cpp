#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hdeid/errors.hpp"
#include "hdeid/latent_geometry.hpp"

using namespace hdeid;

namespace {

LatentTensor latent(std::initializer_list<double> v) { return LatentTensor(Tensor::from_values(v)); }
EditDirection dir(std::initializer_list<double> v) { return EditDirection(Tensor::from_values(v)); }

Tensor random_tensor(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Tensor t(Shape{n});
  for (double& v : t.flat()) v = normal(rng);
  return t;
}

}  // namespace

TEST(LinearEdit, Examples) {
  EXPECT_EQ(linear_edit(latent({1, 2, 3}), dir({0.5, 0, -0.5}), 2.0), Tensor::from_values({2, 2, 2}));
  const auto z = latent({1, -2});
  EXPECT_EQ(linear_edit(z, dir({0, 0}), 1000.0), z);
  EXPECT_THROW(linear_edit(z, dir({1, 2, 3}), 1.0), ShapeError);
}

TEST(TangentProject, Example) {
  const Tensor p = tangent_project(latent({2, 0}), dir({1, 1}));
  EXPECT_NEAR(p[0], 0.0, 1e-12);
  EXPECT_NEAR(p[1], std::sqrt(0.5), 1e-8);
}

TEST(TangentProject, Errors) {
  EXPECT_THROW(tangent_project(latent({0, 0}), dir({1, 1})), DegenerateInputError);
  EXPECT_THROW(tangent_project(latent({1, 1}), dir({0, 0})), DegenerateInputError);
  EXPECT_THROW(tangent_project(latent({1, 1}), dir({1})), ShapeError);
}

TEST(TangentEdit, HandExample) {
  const auto z = latent({2, 0});
  const auto d = dir({1, 1});
  EXPECT_NEAR(tangent_angle(d), std::sqrt(2.0), 1e-8);
  const Tensor out = tangent_edit(z, d, true);
  // 2 cos(sqrt 2), 2 sin(sqrt 2)
  EXPECT_NEAR(out[0], 0.3118871, 1e-6);
  EXPECT_NEAR(out[1], 1.9755324, 1e-6);
  EXPECT_NEAR(norm(out), 2.0, 1e-12);
}

TEST(TangentEdit, ParallelDirectionIsDegenerate) {
  EXPECT_THROW(tangent_edit(latent({2, 0}), dir({3, 0})), DegenerateDirectionError);
  EXPECT_THROW(tangent_edit(latent({2, 0}), dir({-1e-3, 0})), DegenerateDirectionError);
}

TEST(TangentEdit, AngleClampsAtPi) {
  const auto z = latent({1, 0, 0});
  const Tensor out = tangent_edit(z, dir({0, 10, 0}));
  EXPECT_NEAR(out[0], -1.0, 1e-12);
  EXPECT_NEAR(out[1], 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(tangent_angle(dir({0, 10, 0})), M_PI);
}

TEST(TangentEdit, WithoutRenormalizationNormShrinks) {
  const auto z = latent({2, 0});
  const auto d = dir({0.1, 0.1});
  const double lit = norm(tangent_edit(z, d, false));
  EXPECT_LT(lit, 2.0);
  EXPECT_GE(lit, 2.0 * std::sqrt(0.5) - 1e-12);
}

TEST(TangentEdit, PropertiesOnRandomPairs) {
  std::mt19937_64 rng(3);
  for (std::size_t dim : {8u, 64u, 512u}) {
    for (int i = 0; i < 50; ++i) {
      const LatentTensor z(random_tensor(dim, rng, 3.0));
      const EditDirection d(random_tensor(dim, rng, 0.5));
      const Tensor p = tangent_project(z, d);
      EXPECT_NEAR(dot(p, z) / norm(z), 0.0, 1e-9);
      const Tensor out = tangent_edit(z, d);
      EXPECT_NEAR(norm(out) / norm(z), 1.0, 1e-12);
      EXPECT_NEAR(std::acos(std::clamp(dot(out, z) / (norm(z) * norm(out)), -1.0, 1.0)), tangent_angle(d), 1e-6);
    }
  }
}

TEST(TangentEdit, ZeroAndPiLimits) {
  std::mt19937_64 rng(4);
  const LatentTensor z(random_tensor(16, rng));
  Tensor small = random_tensor(16, rng);
  small *= 1e-12 / norm(small);
  EXPECT_LT(max_abs_diff(tangent_edit(z, EditDirection(small)), z), 1e-9);
  Tensor big = random_tensor(16, rng);
  big *= M_PI / norm(big);
  EXPECT_LT(max_abs_diff(tangent_edit(z, EditDirection(big)), -1.0 * Tensor(z)), 1e-9);
}

namespace {

// Central differences of <w, f(z, d)> w.r.t. every entry of z and d.
template <class F>
void check_vjp(const LatentTensor& z, const EditDirection& d, const Tensor& w, F f, const EditGradient& g,
               double step, double tol) {
  for (std::size_t i = 0; i < z.size(); ++i) {
    LatentTensor zp = z, zm = z;
    zp[i] += step;
    zm[i] -= step;
    const double fd = (dot(w, f(zp, d)) - dot(w, f(zm, d))) / (2 * step);
    EXPECT_NEAR(g.grad_z[i], fd, tol * std::max(1.0, std::abs(fd))) << "z[" << i << "]";
  }
  for (std::size_t i = 0; i < d.size(); ++i) {
    EditDirection dp = d, dm = d;
    dp[i] += step;
    dm[i] -= step;
    const double fd = (dot(w, f(z, dp)) - dot(w, f(z, dm))) / (2 * step);
    EXPECT_NEAR(g.grad_dh[i], fd, tol * std::max(1.0, std::abs(fd))) << "dh[" << i << "]";
  }
}

}  // namespace

TEST(EditVjp, LinearMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  const LatentTensor z(random_tensor(12, rng));
  const EditDirection d(random_tensor(12, rng));
  const Tensor w = random_tensor(12, rng);
  check_vjp(
      z, d, w, [](const LatentTensor& a, const EditDirection& b) { return linear_edit(a, b, 3.0); },
      linear_edit_vjp(z, d, 3.0, w), 1e-6, 1e-7);
}

TEST(EditVjp, TangentMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  for (bool renorm : {true, false}) {
    for (double scale : {0.3, 1.0}) {
      const LatentTensor z(random_tensor(10, rng, 2.0));
      const EditDirection d(random_tensor(10, rng, scale));
      const Tensor w = random_tensor(10, rng);
      check_vjp(
          z, d, w,
          [renorm](const LatentTensor& a, const EditDirection& b) { return tangent_edit(a, b, renorm); },
          tangent_edit_vjp(z, d, renorm, w), 1e-6, 1e-7);
    }
  }
}

TEST(EditVjp, TangentBeyondPiHasNoAngleGradient) {
  std::mt19937_64 rng(10);
  const LatentTensor z(random_tensor(6, rng));
  Tensor raw = random_tensor(6, rng);
  raw *= 5.0 / norm(raw);
  const EditDirection d(raw);
  const Tensor w = random_tensor(6, rng);
  const EditGradient g = tangent_edit_vjp(z, d, true, w);
  // theta is pinned at pi, so moving d along itself changes nothing.
  EXPECT_NEAR(dot(g.grad_dh, d), 0.0, 1e-10);
  check_vjp(
      z, d, w, [](const LatentTensor& a, const EditDirection& b) { return tangent_edit(a, b, true); }, g, 1e-6,
      1e-7);
}

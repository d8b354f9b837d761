#include "hdeid/latent_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "hdeid/errors.hpp"

namespace hdeid {
namespace {

void check_pair(const LatentTensor& z, const EditDirection& dh, const char* op) {
  require_same_shape(z, dh, op);
}

// Intermediate quantities shared by the forward and backward tangent passes.
struct TangentFrame {
  double z_norm = 0.0;
  double dh_norm = 0.0;
  double theta = 0.0;
  double cos_uv = 0.0;   // <dh_unit, z_unit>
  double proj_norm = 0.0;
  Tensor z_unit;
  Tensor dh_unit;
  Tensor proj;  // dh_unit - <dh_unit, z_unit> z_unit
};

TangentFrame make_frame(const LatentTensor& z, const EditDirection& dh, const char* op) {
  check_pair(z, dh, op);
  TangentFrame f;
  f.z_norm = norm(z);
  f.dh_norm = norm(dh);
  if (!(f.z_norm > 0.0)) {
    throw DegenerateInputError(std::string(op) + ": latent has zero norm");
  }
  if (!(f.dh_norm > 0.0)) {
    throw DegenerateInputError(std::string(op) + ": edit direction has zero norm");
  }
  f.z_unit = (1.0 / f.z_norm) * Tensor(z);
  f.dh_unit = (1.0 / f.dh_norm) * Tensor(dh);
  f.cos_uv = dot(f.dh_unit, f.z_unit);
  f.proj = f.dh_unit;
  axpy(-f.cos_uv, f.z_unit, f.proj);
  f.proj_norm = norm(f.proj);
  if (f.proj_norm < kParallelThreshold) {
    std::ostringstream os;
    os << op << ": edit direction is parallel to the latent (projection norm " << f.proj_norm << ")";
    throw DegenerateDirectionError(os.str());
  }
  f.theta = std::min(f.dh_norm, std::numbers::pi);
  return f;
}

}  // namespace

LatentTensor linear_edit(const LatentTensor& z, const EditDirection& dh, double lambda) {
  check_pair(z, dh, "linear_edit");
  Tensor out = z;
  axpy(lambda, dh, out);
  return LatentTensor(std::move(out));
}

EditDirection tangent_project(const LatentTensor& z, const EditDirection& dh) {
  return EditDirection(make_frame(z, dh, "tangent_project").proj);
}

double tangent_angle(const EditDirection& dh) { return std::min(norm(dh), std::numbers::pi); }

LatentTensor tangent_edit(const LatentTensor& z, const EditDirection& dh, bool renormalize) {
  const TangentFrame f = make_frame(z, dh, "tangent_edit");
  const double dir_scale = renormalize ? 1.0 / f.proj_norm : 1.0;
  const double a = f.z_norm * std::cos(f.theta);
  const double b = f.z_norm * std::sin(f.theta) * dir_scale;
  Tensor out(z.shape());
  auto o = out.flat();
  auto u = f.z_unit.flat();
  auto p = f.proj.flat();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a * u[i] + b * p[i];
  return LatentTensor(std::move(out));
}

EditGradient linear_edit_vjp(const LatentTensor& z, const EditDirection& dh, double lambda,
                             const Tensor& grad_out) {
  check_pair(z, dh, "linear_edit_vjp");
  require_same_shape(z, grad_out, "linear_edit_vjp");
  return {grad_out, lambda * Tensor(grad_out)};
}

EditGradient tangent_edit_vjp(const LatentTensor& z, const EditDirection& dh, bool renormalize,
                              const Tensor& grad_out) {
  const TangentFrame f = make_frame(z, dh, "tangent_edit_vjp");
  require_same_shape(z, grad_out, "tangent_edit_vjp");
  const Tensor& g = grad_out;
  const Tensor& u = f.z_unit;
  const Tensor& v = f.dh_unit;
  const double n = f.z_norm;
  const double c = std::cos(f.theta);
  const double s = std::sin(f.theta);

  // Output direction d: p/|p| when renormalizing, p otherwise.
  Tensor d = f.proj;
  if (renormalize) d *= 1.0 / f.proj_norm;

  // out = n * (c * u + s * d)
  const double g_dot_u = dot(g, u);
  const double g_dot_d = dot(g, d);
  const double grad_n = c * g_dot_u + s * g_dot_d;
  const double grad_theta = n * (-s * g_dot_u + c * g_dot_d);
  Tensor grad_u = (n * c) * Tensor(g);
  Tensor grad_p = (n * s) * Tensor(g);  // gradient w.r.t. d so far
  if (renormalize) {
    // d = p / |p|
    axpy(-dot(grad_p, d), d, grad_p);
    grad_p *= 1.0 / f.proj_norm;
  }

  // p = v - <v,u> u
  Tensor grad_v = grad_p;
  const double gp_dot_u = dot(grad_p, u);
  axpy(-gp_dot_u, u, grad_v);
  axpy(-f.cos_uv, grad_p, grad_u);
  axpy(-gp_dot_u, v, grad_u);

  // v = dh / |dh|, theta = min(|dh|, pi)
  Tensor grad_dh = grad_v;
  axpy(-dot(grad_v, v), v, grad_dh);
  grad_dh *= 1.0 / f.dh_norm;
  if (f.dh_norm < std::numbers::pi) axpy(grad_theta, v, grad_dh);

  // u = z / |z|, n = |z|
  Tensor grad_z = grad_u;
  axpy(-dot(grad_u, u), u, grad_z);
  grad_z *= 1.0 / n;
  axpy(grad_n, u, grad_z);

  return {std::move(grad_z), std::move(grad_dh)};
}

}  // namespace hdeid

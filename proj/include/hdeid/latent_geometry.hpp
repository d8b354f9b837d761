#pragma once

#include "hdeid/tensor.hpp"

// Linear and geodesic (tangent-plane) edits of h-space latents. All norms and
// inner products use the flattened view; the latent space is treated as one
// Euclidean vector space of dimension d.

namespace hdeid {

// Projection norm (before renormalization) below which a direction counts as
// parallel to the latent.
inline constexpr double kParallelThreshold = 1e-8;

// z + lambda * dh
LatentTensor linear_edit(const LatentTensor& z, const EditDirection& dh, double lambda);

/// Component of dh/|dh| orthogonal to z/|z|. Not renormalized.
EditDirection tangent_project(const LatentTensor& z, const EditDirection& dh);

/// Walks from z along the great circle of radius |z| towards the projected
/// direction, by the angle theta = min(|dh|, pi).
///
/// With `renormalize` the projected direction is scaled to unit length first,
/// so |result| == |z|. Without it the literal formula is used and the norm can
/// shrink by up to the projection's length.
LatentTensor tangent_edit(const LatentTensor& z, const EditDirection& dh, bool renormalize = true);

// Rotation angle used by tangent_edit for a given direction.
double tangent_angle(const EditDirection& dh);

struct EditGradient {
  Tensor grad_z;
  Tensor grad_dh;
};

EditGradient linear_edit_vjp(const LatentTensor& z, const EditDirection& dh, double lambda,
                             const Tensor& grad_out);

// Reverse-mode derivative of tangent_edit with respect to both z and dh.
EditGradient tangent_edit_vjp(const LatentTensor& z, const EditDirection& dh, bool renormalize,
                              const Tensor& grad_out);

}  // namespace hdeid

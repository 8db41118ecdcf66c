#pragma once

#include <numbers>

#include "tagflow/volume.hpp"

namespace tagflow {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Wrapping operator onto the half-open interval [-pi, pi).
double wrap(double theta);

// Trilinear interpolation at a world point (mm). Coordinates outside the
// lattice are clamped onto the boundary faces first.
double trilinear_sample(const ScalarVolume& v, const Vec3& p);
Vec3 trilinear_sample(const VectorVolume& v, const Vec3& p);

// Pull-back warps: out(x) = image(x + disp(x)).
ScalarVolume warp_scalar(const ScalarVolume& image, const VectorVolume& disp);
// Same as warp_scalar but blends wrapped offsets from the stencil's base
// corner, so the interpolant is linear in angle and never averages across
// the +-pi seam. Output lies in [-pi, pi).
ScalarVolume warp_phase(const ScalarVolume& phase, const VectorVolume& disp);

// Separable Gaussian, sigma in mm per axis, truncated at 3 sigma. Taps that
// fall outside the lattice are dropped and the remaining weights
// renormalised. A zero sigma leaves that axis untouched.
ScalarVolume gaussian_smooth(const ScalarVolume& v, const Vec3& sigma_mm);
VectorVolume gaussian_smooth(const VectorVolume& v, const Vec3& sigma_mm);

// Central differences in mm^-1, one-sided on the boundary faces.
VectorVolume gradient_central(const ScalarVolume& v);
// HARP gradient of a wrapped phase: per axis, the smaller-magnitude of the
// raw difference and the difference of the phase shifted by pi and rewrapped.
VectorVolume wrapped_gradient(const ScalarVolume& phase);
ScalarVolume divergence(const VectorVolume& v);
// det(I + grad u), central differences (one-sided on faces).
ScalarVolume jacobian_determinant(const VectorVolume& disp);

// result(x) = inner(x) + outer(x + inner(x)). Warping an image by the result
// is the same as warping it by `outer` and then warping that by `inner`.
VectorVolume compose_displacements(const VectorVolume& outer, const VectorVolume& inner);

} // namespace tagflow

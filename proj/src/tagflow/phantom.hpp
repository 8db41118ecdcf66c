#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "tagflow/volume.hpp"

namespace tagflow {

enum class Axis : int { x = 0, y = 1, z = 2 };

// One volume-preserving shear: coordinate `moved` is displaced by
// amplitude * sin(2*pi*p[driving]/wavelength + phase_offset). Since the
// displacement depends only on the driving coordinate the Jacobian is
// exactly 1 and the inverse is the same shear with the sign flipped.
struct ShearStep {
    Axis moved = Axis::x;
    Axis driving = Axis::y;
    double amplitude_mm = 0.0;
    double wavelength_mm = 1.0;
    double phase_offset_rad = 0.0;

    void validate() const;
};

// Ground-truth motion of a phantom sequence. Frame n applies every step in
// order with its amplitude scaled by schedule[n-1].
struct MotionModel {
    std::vector<ShearStep> steps;
    std::vector<double> schedule;

    int frames() const { return static_cast<int>(schedule.size()); }
    void validate() const;
};

// Material point X -> its position at frame n (1-based).
Vec3 analytic_forward(const MotionModel& model, int n, const Vec3& X);
// Position x at frame n -> material point X.
Vec3 analytic_inverse(const MotionModel& model, int n, const Vec3& x);

struct TagPattern {
    std::array<Vec3, 3> wave_vectors;   // rad/mm

    static TagPattern axis_aligned(const Vec3& periods_mm);
    double period_mm(int d) const;      // 2*pi / |k_d|
    Vec3 unit(int d) const;
};

// I_n(x) = sum_d cos(k_d . X(x)) / 3 with X the material point at x, plus
// optional N(0, noise_sigma^2) noise drawn from a (seed, n)-keyed stream.
ScalarVolume render_tagged_frame(const MotionModel& model, const TagPattern& pattern, const Grid3& grid, int n,
                                 double noise_sigma = 0.0, std::uint64_t seed = 0);

// Pull-back displacement for frame n: x + u(x) is the frame-1 position of
// the material found at x in frame n, so warp_scalar(frame1, u) ~ frame n.
VectorVolume ground_truth_displacement(const MotionModel& model, const Grid3& grid, int n);

// First frame whose peak displacement along some tag direction exceeds half
// that direction's tag period, i.e. where nearest-phase matching becomes
// ambiguous. Empty if the sequence never gets there.
std::optional<int> jump_onset_frame(const MotionModel& model, const TagPattern& pattern);

struct PhantomParams {
    std::array<int, 3> dims{64, 64, 24};
    Vec3 spacing_mm{1.875, 1.875, 6.0};
    int frames = 26;
    double tag_period_mm = 12.0;          // in-plane (x and y) tags
    double tag_period_z_mm = 36.0;        // through-plane tags, 6 slices per period
    double peak_half_periods = 1.2;       // dominant shear, in half tag periods
    int ramp_end_frame = 13;              // smoothstep reaches its peak here
    double shear_wavelength_mm = 480.0;   // dominant x shear driven by y, peak at the FOV centre
    double secondary_amplitude_mm = 1.0;  // y shear driven by x
    double secondary_wavelength_mm = 120.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 1;

    void validate() const;
    // Voxel centres sit half a voxel in, so no column lands exactly on a tag's
    // +-pi seam.
    Grid3 grid() const { return Grid3(dims, spacing_mm, 0.5 * spacing_mm); }
};

MotionModel make_motion_model(const PhantomParams& params);
TagPattern make_tag_pattern(const PhantomParams& params);

struct PhantomSequence {
    PhantomParams params;
    Grid3 grid;
    MotionModel model;
    TagPattern pattern;
    std::vector<ScalarVolume> frames;   // frames[0] is frame 1
};

PhantomSequence make_sequence(const PhantomParams& params);
PhantomSequence make_default_sequence(std::uint64_t seed);

} // namespace tagflow

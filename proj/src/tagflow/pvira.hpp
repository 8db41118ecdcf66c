#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "tagflow/harp.hpp"
#include "tagflow/volume.hpp"

namespace tagflow {

struct PviraParams {
    Vec3 sigma_fluid_mm{2.0, 2.0, 2.0};       // smoothing of each update field
    Vec3 sigma_diffusion_mm{2.0, 2.0, 6.0};   // smoothing of the velocity field
    double sigma_i = 1.0;                     // demons noise scale (rad)
    int max_iters = 200;
    double step_max_voxels = 0.4;             // cap on |update|, in units of the finest spacing
    bool incompressible = true;
    // Directions whose harmonic magnitude (min of moving and fixed) is at or
    // below this fraction of the fixed image's median magnitude get no force.
    double magnitude_threshold = 0.1;
    double stop_tol = 1e-3;                   // stop once max|change of v| < stop_tol * finest spacing
    int taper_voxels = 0;                     // fade of the projection correction at the faces

    void validate() const;
};

struct TraceRecord {
    int iteration = 0;
    double mean_phase_error = 0.0;   // rad, over gated (voxel, direction) pairs
    double max_update_mm = 0.0;      // max change of the velocity field
};

struct RegistrationResult {
    VectorVolume velocity;   // stationary velocity field
    VectorVolume forward;    // exp(velocity); warp_phase(moving, forward) ~ fixed
    VectorVolume inverse;    // exp(-velocity)
    std::vector<TraceRecord> trace;
};

// One symmetric demons force evaluation over the three phase channels at
// the current displacement. See register_pair for how it is used.
VectorVolume demons_update(const PhaseSet& moving, const PhaseSet& fixed, const VectorVolume& current_disp,
                           const PviraParams& params);

// Scaling and squaring: v is divided by 2^S so the largest step is at most
// half the finest spacing, then self-composed S times.
VectorVolume exp_velocity(const VectorVolume& velocity);

// Discrete Helmholtz projection with periodic central-difference symbols.
// With taper_voxels > 0 the gradient correction is faded to zero over that
// many voxels at every face.
VectorVolume project_divergence_free(const VectorVolume& velocity, int taper_voxels = 0);

// Log-domain demons. Starts from `init_velocity` when given (warm start),
// otherwise from zero; nothing else about the iteration changes.
RegistrationResult register_pair(const PhaseSet& moving, const PhaseSet& fixed, const PviraParams& params,
                                 const std::optional<VectorVolume>& init_velocity = std::nullopt);

// max |compose(forward, inverse)| over voxels at least `margin` from the faces.
double inverse_consistency_error(const VectorVolume& forward, const VectorVolume& inverse, int margin = 3);

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRecord>& trace);

} // namespace tagflow

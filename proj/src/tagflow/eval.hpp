#pragma once

#include <array>
#include <span>
#include <vector>

#include "tagflow/harp.hpp"
#include "tagflow/phantom.hpp"
#include "tagflow/strategies.hpp"

namespace tagflow {

// One line of metrics.csv. slice == -1 is the whole-volume row, whose
// ssim/corr are the averages over slice rows.
struct MetricRow {
    Method method = Method::direct;
    int frame = 0;
    int slice = -1;
    double ssim = 0.0;
    double corr = 0.0;
    double median_epe_mm = 0.0;   // NaN without ground truth
    double max_epe_mm = 0.0;
    double jump_fraction = 0.0;
};

// Frame-1 phases pulled back through psi: what frame n should look like.
PhaseSet deformed_phase(const VectorVolume& psi, const PhaseSet& first);

struct Slice2D {
    int width = 0;
    int height = 0;
    std::vector<double> values;   // row-major, width fastest

    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
};

// Plane `index` orthogonal to `axis`. The remaining axes keep their order,
// the lower one running fastest.
Slice2D extract_slice(const ScalarVolume& v, int axis, int index);

// Mean SSIM over every fully contained window x window block, with uniform
// weights and 1/N moments. `mask`, when non-empty, keeps only windows whose
// centre pixel is set.
double ssim(const Slice2D& a, const Slice2D& b, int window = 7, double dynamic_range = 6.283185307179586,
            std::span<const unsigned char> mask = {});

enum class SsimMode { raw, sincos };

// SSIM of two wrapped phase slices: raw compares the wrapped values over a
// 2*pi range, sincos averages SSIM of the cos and sin channels (range 2).
double phase_ssim(const Slice2D& a, const Slice2D& b, SsimMode mode, int window = 7,
                  std::span<const unsigned char> mask = {});

// Pearson correlation. Throws "degenerate input" when either side is flat.
double corr(std::span<const double> a, std::span<const double> b);

struct EndpointError {
    double median_mm = 0.0;
    double max_mm = 0.0;
    ScalarVolume per_voxel;   // |estimate - truth| everywhere, margin or not
};

EndpointError endpoint_error(const VectorVolume& estimate, const VectorVolume& truth, int margin = 3);

struct JumpFraction {
    std::array<double, 3> per_direction{};
    double overall = 0.0;   // max over directions
};

// Fraction of interior voxels whose error along a tag direction exceeds half
// that direction's tag period.
JumpFraction detect_tag_jump(const VectorVolume& estimate, const VectorVolume& truth, const TagPattern& pattern,
                             int margin = 3);

struct GroundTruth {
    MotionModel model;
    TagPattern pattern;
};

struct EvalOptions {
    int margin_voxels = 3;
    int ssim_window = 7;
    SsimMode ssim_mode = SsimMode::raw;
    int slice_axis = 2;
    std::vector<int> directions{0, 1};   // phase channels entering SSIM/CORR
    bool mask_magnitude = false;          // restrict slices to strong harmonic magnitude
    double mask_fraction = 0.1;           // of the median reference magnitude
    int jobs = 1;
};

struct EvaluationResult {
    std::vector<MetricRow> rows;           // (method, frame, slice) order, volume row last per frame
    std::vector<MetricRow> worst_slices;   // lowest-SSIM slice per (method, frame)
};

EvaluationResult evaluate_sequence(std::span<const SequenceEstimate> estimates, std::span<const PhaseSet> phases,
                                   const GroundTruth* truth, const EvalOptions& options = {});

} // namespace tagflow

#include "tagflow/phantom.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "tagflow/error.hpp"
#include "tagflow/volume_ops.hpp"

namespace tagflow {

void ShearStep::validate() const
{
    if (moved == driving)
        fail(ErrorKind::invalid_argument, "shear step must move a different axis than it is driven by");
    if (!(wavelength_mm > 0.0) || !std::isfinite(amplitude_mm) || !std::isfinite(phase_offset_rad))
        fail(ErrorKind::invalid_argument, "shear step parameters must be finite with positive wavelength");
}

void MotionModel::validate() const
{
    for (const auto& s : steps)
        s.validate();
    if (schedule.empty())
        fail(ErrorKind::invalid_argument, "motion model needs at least one frame");
    for (double a : schedule)
        if (!(a >= 0.0 && a <= 1.0))
            fail(ErrorKind::invalid_argument, "amplitude schedule values must lie in [0, 1]");
}

namespace {

double scale_for(const MotionModel& model, int n)
{
    if (n < 1 || n > model.frames())
        fail(ErrorKind::invalid_argument, "frame " + std::to_string(n) + " out of range 1.." +
                                              std::to_string(model.frames()));
    return model.schedule[static_cast<std::size_t>(n - 1)];
}

inline double shear(const ShearStep& s, double scale, const Vec3& p)
{
    return scale * s.amplitude_mm *
           std::sin(kTwoPi * p[static_cast<int>(s.driving)] / s.wavelength_mm + s.phase_offset_rad);
}

double smoothstep(double t)
{
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

} // namespace

Vec3 analytic_forward(const MotionModel& model, int n, const Vec3& X)
{
    const double a = scale_for(model, n);
    Vec3 p = X;
    for (const auto& s : model.steps)
        p[static_cast<int>(s.moved)] += shear(s, a, p);
    return p;
}

Vec3 analytic_inverse(const MotionModel& model, int n, const Vec3& x)
{
    const double a = scale_for(model, n);
    Vec3 p = x;
    for (auto it = model.steps.rbegin(); it != model.steps.rend(); ++it)
        p[static_cast<int>(it->moved)] -= shear(*it, a, p);
    return p;
}

TagPattern TagPattern::axis_aligned(const Vec3& periods_mm)
{
    TagPattern t;
    for (int d = 0; d < 3; ++d) {
        if (!(periods_mm[d] > 0.0))
            fail(ErrorKind::invalid_argument, "tag periods must be positive");
        Vec3 k;
        k[d] = kTwoPi / periods_mm[d];
        t.wave_vectors[static_cast<std::size_t>(d)] = k;
    }
    return t;
}

double TagPattern::period_mm(int d) const { return kTwoPi / wave_vectors[static_cast<std::size_t>(d)].norm(); }

Vec3 TagPattern::unit(int d) const
{
    const Vec3& k = wave_vectors[static_cast<std::size_t>(d)];
    return k * (1.0 / k.norm());
}

ScalarVolume render_tagged_frame(const MotionModel& model, const TagPattern& pattern, const Grid3& grid, int n,
                                 double noise_sigma, std::uint64_t seed)
{
    scale_for(model, n);
    if (!(noise_sigma >= 0.0))
        fail(ErrorKind::invalid_argument, "noise sigma must be >= 0");
    ScalarVolume out(grid);
    for (int k = 0; k < grid.dim(2); ++k)
        for (int j = 0; j < grid.dim(1); ++j)
            for (int i = 0; i < grid.dim(0); ++i) {
                const Vec3 X = analytic_inverse(model, n, grid.world(i, j, k));
                double v = 0.0;
                for (const Vec3& kv : pattern.wave_vectors)
                    v += std::cos(kv.dot(X));
                out.at(i, j, k) = v / 3.0;
            }
    if (noise_sigma > 0.0) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(n)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> noise(0.0, noise_sigma);
        for (double& v : out.values())
            v += noise(rng);
    }
    return out;
}

VectorVolume ground_truth_displacement(const MotionModel& model, const Grid3& grid, int n)
{
    scale_for(model, n);
    VectorVolume out(grid, FieldKind::displacement);
    for (int k = 0; k < grid.dim(2); ++k)
        for (int j = 0; j < grid.dim(1); ++j)
            for (int i = 0; i < grid.dim(0); ++i) {
                const Vec3 x = grid.world(i, j, k);
                out.at(i, j, k) = analytic_inverse(model, n, x) - x;
            }
    return out;
}

std::optional<int> jump_onset_frame(const MotionModel& model, const TagPattern& pattern)
{
    for (int n = 1; n <= model.frames(); ++n) {
        const double a = model.schedule[static_cast<std::size_t>(n - 1)];
        for (int d = 0; d < 3; ++d) {
            const Vec3 khat = pattern.unit(d);
            double along = 0.0;
            for (const auto& s : model.steps)
                along += a * std::abs(s.amplitude_mm) * std::abs(khat[static_cast<int>(s.moved)]);
            if (along > 0.5 * pattern.period_mm(d))
                return n;
        }
    }
    return std::nullopt;
}

void PhantomParams::validate() const
{
    (void)grid();
    if (frames < 2)
        fail(ErrorKind::invalid_argument, "phantom needs at least 2 frames");
    if (!(tag_period_mm > 0.0) || !(tag_period_z_mm > 0.0))
        fail(ErrorKind::invalid_argument, "tag periods must be positive");
    if (!(peak_half_periods >= 0.0) || !std::isfinite(peak_half_periods))
        fail(ErrorKind::invalid_argument, "peak_half_periods must be >= 0");
    if (ramp_end_frame < 2)
        fail(ErrorKind::invalid_argument, "ramp_end_frame must be >= 2");
    if (!(shear_wavelength_mm > 0.0) || !(secondary_wavelength_mm > 0.0))
        fail(ErrorKind::invalid_argument, "shear wavelength must be positive");
    if (!std::isfinite(secondary_amplitude_mm))
        fail(ErrorKind::invalid_argument, "secondary amplitude must be finite");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
        fail(ErrorKind::invalid_argument, "noise sigma must be >= 0");
}

MotionModel make_motion_model(const PhantomParams& params)
{
    params.validate();
    MotionModel m;
    // Dominant shear peaks at the centre of the periodic field of view so its
    // values match across the wrap-around boundary.
    const double centre = params.grid().origin().y + 0.5 * params.dims[1] * params.spacing_mm.y;
    m.steps.push_back({Axis::x, Axis::y, params.peak_half_periods * 0.5 * params.tag_period_mm,
                       params.shear_wavelength_mm, 0.5 * kPi - kTwoPi * centre / params.shear_wavelength_mm});
    if (params.secondary_amplitude_mm != 0.0)
        m.steps.push_back(
            {Axis::y, Axis::x, params.secondary_amplitude_mm, params.secondary_wavelength_mm, kPi / 3.0});
    m.schedule.resize(static_cast<std::size_t>(params.frames));
    for (int n = 1; n <= params.frames; ++n)
        m.schedule[static_cast<std::size_t>(n - 1)] =
            smoothstep(static_cast<double>(n - 1) / static_cast<double>(params.ramp_end_frame - 1));
    return m;
}

TagPattern make_tag_pattern(const PhantomParams& params)
{
    return TagPattern::axis_aligned({params.tag_period_mm, params.tag_period_mm, params.tag_period_z_mm});
}

PhantomSequence make_sequence(const PhantomParams& params)
{
    PhantomSequence seq{params, params.grid(), make_motion_model(params), make_tag_pattern(params), {}};
    seq.frames.reserve(static_cast<std::size_t>(params.frames));
    for (int n = 1; n <= params.frames; ++n)
        seq.frames.push_back(
            render_tagged_frame(seq.model, seq.pattern, seq.grid, n, params.noise_sigma, params.seed));
    return seq;
}

PhantomSequence make_default_sequence(std::uint64_t seed)
{
    PhantomParams p;
    p.seed = seed;
    return make_sequence(p);
}

} // namespace tagflow

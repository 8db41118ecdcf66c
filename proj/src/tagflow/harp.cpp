#include "tagflow/harp.hpp"

#include <cmath>

#include "tagflow/error.hpp"
#include "tagflow/fft.hpp"
#include "tagflow/volume_ops.hpp"

namespace tagflow {

void HarpFilterSpec::validate() const
{
    if (!center.finite() || !(radius > 0.0))
        fail(ErrorKind::invalid_argument, "HARP filter needs a finite center and positive radius");
    if (radius >= center.norm())
        fail(ErrorKind::invalid_argument, "filter overlaps DC");
    if (profile == FilterProfile::raised_cosine && !(rolloff > 0.0 && rolloff <= 1.0))
        fail(ErrorKind::invalid_argument, "HARP rolloff must lie in (0, 1]");
}

double HarpFilterSpec::response(const Vec3& omega) const
{
    const double r = (omega - center).norm();
    if (r > radius)
        return 0.0;
    if (profile == FilterProfile::hard_sphere)
        return 1.0;
    const double flat = (1.0 - rolloff) * radius;
    if (r <= flat)
        return 1.0;
    return 0.5 * (1.0 + std::cos(kPi * (r - flat) / (radius - flat)));
}

std::array<HarpFilterSpec, 3> default_filter_specs(const TagPattern& pattern, double radius_fraction,
                                                   FilterProfile profile, double rolloff)
{
    std::array<HarpFilterSpec, 3> specs;
    for (std::size_t d = 0; d < 3; ++d) {
        specs[d] = {pattern.wave_vectors[d], radius_fraction * pattern.wave_vectors[d].norm(), profile, rolloff};
        specs[d].validate();
    }
    return specs;
}

ComplexField apply_bandpass(const ComplexField& data, const Grid3& grid, const HarpFilterSpec& spec)
{
    spec.validate();
    if (data.size() != grid.size())
        fail(ErrorKind::invalid_argument, "grid mismatch");
    ComplexBuffer buf(grid.size());
    for (std::size_t n = 0; n < data.size(); ++n)
        buf[n] = data[n];
    fft3_forward(buf, grid.dims());

    std::array<std::vector<double>, 3> freq;
    for (int a = 0; a < 3; ++a) {
        auto& f = freq[static_cast<std::size_t>(a)];
        f.resize(static_cast<std::size_t>(grid.dim(a)));
        for (int b = 0; b < grid.dim(a); ++b)
            f[static_cast<std::size_t>(b)] = bin_frequency(b, grid.dim(a), grid.spacing()[a]);
    }
    for (int k = 0; k < grid.dim(2); ++k)
        for (int j = 0; j < grid.dim(1); ++j)
            for (int i = 0; i < grid.dim(0); ++i) {
                const Vec3 omega{freq[0][static_cast<std::size_t>(i)], freq[1][static_cast<std::size_t>(j)],
                                 freq[2][static_cast<std::size_t>(k)]};
                buf[grid.index(i, j, k)] *= spec.response(omega);
            }

    fft3_inverse(buf, grid.dims());
    ComplexField out(grid.size());
    for (std::size_t n = 0; n < out.size(); ++n)
        out[n] = buf[n];
    return out;
}

HarmonicImage extract_phase(const ScalarVolume& image, const HarpFilterSpec& spec)
{
    const Grid3& g = image.grid();
    ComplexField data(g.size());
    for (std::size_t n = 0; n < g.size(); ++n)
        data[n] = image[n];
    const ComplexField filtered = apply_bandpass(data, g, spec);
    HarmonicImage out{ScalarVolume(g), ScalarVolume(g)};
    for (std::size_t n = 0; n < g.size(); ++n) {
        out.phase[n] = wrap(std::arg(filtered[n]));
        out.magnitude[n] = std::abs(filtered[n]);
    }
    return out;
}

void PhaseSet::validate() const
{
    const Grid3& g = grid();
    for (std::size_t d = 0; d < 3; ++d) {
        require_same_grid(g, phases[d].grid());
        require_same_grid(g, magnitudes[d].grid());
        for (double p : phases[d].values())
            if (!(p >= -kPi && p < kPi))
                fail(ErrorKind::invalid_argument, "phase values must be wrapped to [-pi, pi)");
        for (double m : magnitudes[d].values())
            if (!(m >= 0.0) || !std::isfinite(m))
                fail(ErrorKind::invalid_argument, "harmonic magnitudes must be finite and >= 0");
    }
}

PhaseSet extract_phase_set(const ScalarVolume& image, const std::array<HarpFilterSpec, 3>& specs)
{
    PhaseSet set;
    for (std::size_t d = 0; d < 3; ++d) {
        HarmonicImage h = extract_phase(image, specs[d]);
        set.phases[d] = std::move(h.phase);
        set.magnitudes[d] = std::move(h.magnitude);
        set.specs[d] = specs[d];
    }
    return set;
}

} // namespace tagflow

#pragma once

#include <array>
#include <complex>
#include <vector>

#include "tagflow/phantom.hpp"
#include "tagflow/volume.hpp"

namespace tagflow {

enum class FilterProfile { hard_sphere, raised_cosine };

// Band-pass ball around one tag harmonic, in physical angular frequency
// (rad/mm). The raised-cosine profile is flat out to (1 - rolloff) * radius
// and falls to zero at radius.
struct HarpFilterSpec {
    Vec3 center;
    double radius = 0.0;
    FilterProfile profile = FilterProfile::raised_cosine;
    double rolloff = 0.25;

    void validate() const;
    double response(const Vec3& omega) const;
};

std::array<HarpFilterSpec, 3> default_filter_specs(const TagPattern& pattern, double radius_fraction = 0.6,
                                                   FilterProfile profile = FilterProfile::raised_cosine,
                                                   double rolloff = 0.25);

using ComplexField = std::vector<std::complex<double>>;

// Multiplies the spectrum of `data` (x-fastest over `grid`) by the filter.
ComplexField apply_bandpass(const ComplexField& data, const Grid3& grid, const HarpFilterSpec& spec);

struct HarmonicImage {
    ScalarVolume phase;       // wrapped, [-pi, pi)
    ScalarVolume magnitude;
};

HarmonicImage extract_phase(const ScalarVolume& image, const HarpFilterSpec& spec);

// Three wrapped harmonic phases plus magnitudes; the registration input.
struct PhaseSet {
    std::array<ScalarVolume, 3> phases;
    std::array<ScalarVolume, 3> magnitudes;
    std::array<HarpFilterSpec, 3> specs;

    const Grid3& grid() const { return phases[0].grid(); }
    void validate() const;
};

PhaseSet extract_phase_set(const ScalarVolume& image, const std::array<HarpFilterSpec, 3>& specs);

} // namespace tagflow

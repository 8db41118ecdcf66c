#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <random>

#include "support.hpp"
#include "tagflow/error.hpp"
#include "tagflow/harp.hpp"
#include "tagflow/pvira.hpp"
#include "tagflow/volume_ops.hpp"

using namespace tagflow;

TEST_SUITE_BEGIN("pvira-engine");

namespace {

// Direction 0 carries phase(x) with unit magnitude; the other two are dead.
PhaseSet single_channel(const Grid3& g, const std::function<double(const Vec3&)>& phase)
{
    PhaseSet p;
    p.phases[0] = test::scalar_field(g, [&](const Vec3& x) { return wrap(phase(x)); });
    p.magnitudes[0] = ScalarVolume(g, 1.0);
    for (std::size_t d = 1; d < 3; ++d) {
        p.phases[d] = ScalarVolume(g, 0.0);
        p.magnitudes[d] = ScalarVolume(g, 0.0);
    }
    return p;
}

double median_epe(const VectorVolume& a, const VectorVolume& b, int margin)
{
    std::vector<double> e;
    const Grid3& g = a.grid();
    for (int k = margin; k < g.dim(2) - margin; ++k)
        for (int j = margin; j < g.dim(1) - margin; ++j)
            for (int i = margin; i < g.dim(0) - margin; ++i)
                e.push_back((a.at(i, j, k) - b.at(i, j, k)).norm());
    std::nth_element(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(e.size() / 2), e.end());
    return e[e.size() / 2];
}

VectorVolume negate(const VectorVolume& v)
{
    VectorVolume n = v;
    for (Vec3& x : n.values())
        x = -x;
    return n;
}

} // namespace

TEST_CASE("parameter validation")
{
    PviraParams p;
    CHECK_NOTHROW(p.validate());
    p.max_iters = 0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.step_max_voxels = 0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.sigma_fluid_mm.y = -1;
    try {
        p.validate();
        FAIL("accepted a negative sigma");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
    }
}

TEST_CASE("demons update vanishes on identical inputs")
{
    const PhantomSequence seq = make_default_sequence(1);
    const PhaseSet p = extract_phase_set(seq.frames[4], default_filter_specs(seq.pattern));
    const VectorVolume u = demons_update(p, p, VectorVolume(seq.grid, FieldKind::displacement), PviraParams{});
    CHECK(u.max_norm() == 0.0);
}

TEST_CASE("demons update follows the scalar demons formula")
{
    const Grid3 g({24, 6, 6}, {1.875, 1.875, 1.875});
    const double k = 2 * kPi / 12.0, t = 0.5, sigma_i = 1.0;
    const PhaseSet moving = single_channel(g, [&](const Vec3& x) { return k * x.x; });
    const PhaseSet fixed = single_channel(g, [&](const Vec3& x) { return k * (x.x - t); });
    PviraParams params;
    params.sigma_i = sigma_i;
    const VectorVolume u = demons_update(moving, fixed, VectorVolume(g, FieldKind::displacement), params);
    const double kt = k * t;
    const double magnitude = t * k * k / (k * k + kt * kt / (sigma_i * sigma_i));
    // Pull-back: moving(x + u) should match fixed(x) = moving(x - t), so the
    // update points towards -x.
    for (const Vec3& v : u.values()) {
        CHECK(v.x == doctest::Approx(-magnitude).epsilon(1e-9));
        CHECK(std::abs(v.y) < 1e-12);
        CHECK(std::abs(v.z) < 1e-12);
    }
}

TEST_CASE("beyond half a tag period the update points the wrong way")
{
    const Grid3 g({24, 6, 6}, {1.875, 1.875, 1.875});
    const double L = 12.0, k = 2 * kPi / L, t = 0.75 * L;
    const PhaseSet moving = single_channel(g, [&](const Vec3& x) { return k * x.x; });
    const PhaseSet fixed = single_channel(g, [&](const Vec3& x) { return k * (x.x - t); });
    const VectorVolume u = demons_update(moving, fixed, VectorVolume(g, FieldKind::displacement), PviraParams{});
    // The correct pull-back displacement is -t; aliasing makes it look like +L/4.
    for (const Vec3& v : u.values())
        CHECK(v.x > 0.0);
}

TEST_CASE("update magnitude is capped")
{
    const Grid3 g({24, 6, 6}, {1.875, 1.875, 1.875});
    const double k = 2 * kPi / 12.0;
    const PhaseSet moving = single_channel(g, [&](const Vec3& x) { return k * x.x; });
    const PhaseSet fixed = single_channel(g, [&](const Vec3& x) { return k * (x.x - 2.5); });
    PviraParams params;
    params.sigma_i = 100.0;
    params.step_max_voxels = 0.2;
    const VectorVolume u = demons_update(moving, fixed, VectorVolume(g, FieldKind::displacement), params);
    CHECK(u.max_norm() == doctest::Approx(0.2 * 1.875));
}

TEST_CASE("exp of zero and constant fields is exact")
{
    const Grid3 g({10, 9, 8}, {1.875, 1.875, 6.0});
    CHECK(exp_velocity(VectorVolume(g, FieldKind::velocity)).max_norm() == 0.0);
    for (const Vec3 t : {Vec3{0.3, -0.2, 0.1}, Vec3{7.5, 3.0, -12.0}, Vec3{-40.0, 0.0, 1e-3}}) {
        const VectorVolume d = exp_velocity(VectorVolume(g, FieldKind::velocity, t));
        CHECK(d.kind() == FieldKind::displacement);
        for (const Vec3& v : d.values())
            CHECK((v - t).norm() <= 1e-12);
    }
    CHECK_THROWS_AS(exp_velocity(VectorVolume(g, FieldKind::displacement)), Error);
    VectorVolume bad(g, FieldKind::velocity);
    bad[5].y = std::numeric_limits<double>::infinity();
    try {
        (void)exp_velocity(bad);
        FAIL("accepted a non-finite field");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numerical);
    }
}

TEST_CASE("projection keeps divergence-free fields and removes gradients")
{
    const Grid3 g({32, 24, 16}, {1.875, 1.875, 6.0});
    const double Lx = 32 * 1.875, Ly = 24 * 1.875, Lz = 16 * 6.0;
    const VectorVolume shear = test::vector_field(g, FieldKind::velocity, [&](const Vec3& p) {
        return Vec3{std::sin(2 * kPi * p.y / Ly) + 0.5 * std::cos(4 * kPi * p.z / Lz), 0.3 * std::sin(2 * kPi * p.x / Lx),
                    0.0};
    });
    CHECK(test::max_diff(project_divergence_free(shear), shear) < 1e-8);

    // grad psi of a periodic psi, taken with the same periodic central differences.
    auto psi = [&](const Vec3& p) {
        return std::sin(2 * kPi * p.x / Lx + 0.3) * std::cos(4 * kPi * p.y / Ly) + 0.7 * std::sin(2 * kPi * p.z / Lz);
    };
    const ScalarVolume s = test::scalar_field(g, psi);
    VectorVolume grad(g, FieldKind::velocity);
    for (int k = 0; k < 16; ++k)
        for (int j = 0; j < 24; ++j)
            for (int i = 0; i < 32; ++i) {
                auto at = [&](int a, int b, int c) { return s.at((a + 32) % 32, (b + 24) % 24, (c + 16) % 16); };
                grad.at(i, j, k) = {(at(i + 1, j, k) - at(i - 1, j, k)) / (2 * 1.875),
                                    (at(i, j + 1, k) - at(i, j - 1, k)) / (2 * 1.875),
                                    (at(i, j, k + 1) - at(i, j, k - 1)) / (2 * 6.0)};
            }
    CHECK(project_divergence_free(grad).max_norm() < 1e-10);

    const VectorVolume c(g, FieldKind::velocity, {0.4, -1.0, 2.0});
    CHECK(test::max_diff(project_divergence_free(c), c) < 1e-12);
}

TEST_CASE("projected fields have no interior divergence")
{
    const Grid3 g({32, 32, 16}, {1.875, 1.875, 6.0});
    std::mt19937 rng(9);
    std::normal_distribution<double> n01;
    const double L[3] = {32 * 1.875, 32 * 1.875, 16 * 6.0};
    // A handful of periodic modes with random amplitudes.
    struct Mode {
        int f[3];
        Vec3 a;
        double phase;
    };
    std::vector<Mode> modes;
    for (int m = 0; m < 6; ++m)
        modes.push_back({{m % 3, (m + 1) % 4, m % 2}, {n01(rng), n01(rng), n01(rng)}, n01(rng)});
    const VectorVolume v = test::vector_field(g, FieldKind::velocity, [&](const Vec3& p) {
        Vec3 out;
        for (const Mode& md : modes) {
            const double arg = 2 * kPi * (md.f[0] * p.x / L[0] + md.f[1] * p.y / L[1] + md.f[2] * p.z / L[2]) + md.phase;
            out += md.a * std::sin(arg);
        }
        return out;
    });
    const VectorVolume proj = project_divergence_free(v);
    const ScalarVolume div = divergence(proj);
    CHECK(test::interior_max(g, 1, [&](int i, int j, int k) { return div.at(i, j, k); }) < 1e-6);
}

TEST_CASE("tapered projection leaves the faces alone")
{
    const Grid3 g({24, 20, 12}, {1.875, 1.875, 6.0});
    const VectorVolume v = test::vector_field(g, FieldKind::velocity, [](const Vec3& p) {
        return Vec3{std::sin(0.2 * p.x) * std::cos(0.1 * p.y), 0.3 * std::cos(0.05 * p.z), std::sin(0.07 * p.x)};
    });
    const VectorVolume full = project_divergence_free(v);
    const VectorVolume tapered = project_divergence_free(v, 3);
    double face = 0.0, inner = 0.0;
    for (int k = 0; k < 12; ++k)
        for (int j = 0; j < 20; ++j)
            for (int i = 0; i < 24; ++i) {
                const bool on_face = i == 0 || j == 0 || k == 0 || i == 23 || j == 19 || k == 11;
                const bool deep = std::min({i, j, k, 23 - i, 19 - j, 11 - k}) >= 3;
                if (on_face)
                    face = std::max(face, (tapered.at(i, j, k) - v.at(i, j, k)).norm());
                if (deep)
                    inner = std::max(inner, (tapered.at(i, j, k) - full.at(i, j, k)).norm());
            }
    CHECK(face == 0.0);
    CHECK(inner < 1e-12);
    CHECK(test::max_diff(project_divergence_free(v, 0), full) == 0.0);
}

TEST_CASE("registering a volume to itself gives the identity")
{
    const PhantomSequence seq = make_default_sequence(1);
    const PhaseSet p = extract_phase_set(seq.frames[6], default_filter_specs(seq.pattern));
    PviraParams params;
    params.max_iters = 20;
    const RegistrationResult r = register_pair(p, p, params);
    CHECK(r.forward.max_norm() < 1e-3 * seq.grid.min_spacing());
    CHECK(r.velocity.kind() == FieldKind::velocity);
    CHECK(r.forward.kind() == FieldKind::displacement);
    CHECK(r.trace.size() == 1);   // zero update stops at once
}

TEST_CASE("small phantom motion is recovered with an incompressible, invertible field")
{
    const PhantomSequence seq = make_default_sequence(1);
    const auto specs = default_filter_specs(seq.pattern);
    const PhaseSet first = extract_phase_set(seq.frames[0], specs);
    const Grid3& g = seq.grid;
    const PviraParams params;
    for (int n : {2, 5}) {
        const PhaseSet target = extract_phase_set(seq.frames[static_cast<std::size_t>(n - 1)], specs);
        const RegistrationResult r = register_pair(first, target, params);
        const VectorVolume truth = ground_truth_displacement(seq.model, g, n);
        CHECK(median_epe(r.forward, truth, 3) < 0.4 * g.min_spacing());
        CHECK(inverse_consistency_error(r.forward, r.inverse) < 0.1 * g.min_spacing());
        const ScalarVolume J = jacobian_determinant(r.forward);
        CHECK(test::interior_max(g, 3, [&](int i, int j, int k) { return J.at(i, j, k) - 1.0; }) <= 0.05);

        // Mean phase error falls after the first few iterations; allow a few
        // small uphill steps.
        int violations = 0, steps = 0;
        for (std::size_t it = 3; it + 1 < r.trace.size(); ++it, ++steps)
            if (r.trace[it + 1].mean_phase_error > r.trace[it].mean_phase_error * (1 + 1e-9))
                ++violations;
        CHECK(violations <= std::max(1, steps / 20));
    }
}

TEST_CASE("non-finite initial velocity is reported as numerical divergence")
{
    const Grid3 g({8, 8, 8}, {1.875, 1.875, 6.0});
    const PhaseSet p = single_channel(g, [](const Vec3& x) { return 0.5 * x.x; });
    VectorVolume init(g, FieldKind::velocity);
    init[3].x = std::nan("");
    try {
        (void)register_pair(p, p, PviraParams{}, init);
        FAIL("accepted a NaN initial velocity");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numerical);
        CHECK(std::string(e.what()).find("numerical divergence at iteration 0") != std::string::npos);
    }
    CHECK_THROWS_AS(register_pair(p, p, PviraParams{}, VectorVolume(g, FieldKind::displacement)), Error);
}

TEST_CASE("trace csv layout")
{
    const auto dir = test::scratch_dir("trace");
    write_trace_csv(dir / "t.csv", {{1, 0.5, 0.25}, {2, 0.125, 0.0625}});
    std::ifstream f(dir / "t.csv");
    std::string header, first;
    std::getline(f, header);
    std::getline(f, first);
    CHECK(header == "iteration,mean_phase_err,max_update");
    CHECK(first == "1,0.5,0.25");
}

TEST_SUITE_END();

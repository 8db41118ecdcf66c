#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "tagflow/error.hpp"
#include "tagflow/eval.hpp"
#include "tagflow/harp.hpp"
#include "tagflow/volume_ops.hpp"

using namespace tagflow;

TEST_SUITE_BEGIN("eval");

namespace {

Slice2D random_slice(int w, int h, unsigned seed, double lo = -kPi, double hi = kPi)
{
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Slice2D s{w, h, std::vector<double>(static_cast<std::size_t>(w * h))};
    for (double& v : s.values)
        v = u(rng);
    return s;
}

// Direct evaluation of the SSIM formula, window by window, with one-pass
// long double sums.
double ssim_oracle(const Slice2D& a, const Slice2D& b, int win, double L)
{
    const long double c1 = (0.01L * L) * (0.01L * L), c2 = (0.03L * L) * (0.03L * L);
    long double total = 0.0L;
    int count = 0;
    for (int y0 = 0; y0 + win <= a.height; ++y0)
        for (int x0 = 0; x0 + win <= a.width; ++x0) {
            long double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (int y = y0; y < y0 + win; ++y)
                for (int x = x0; x < x0 + win; ++x) {
                    const long double p = a.at(x, y), q = b.at(x, y);
                    sa += p;
                    sb += q;
                    saa += p * p;
                    sbb += q * q;
                    sab += p * q;
                }
            const long double n = win * win;
            const long double ma = sa / n, mb = sb / n;
            const long double va = saa / n - ma * ma, vb = sbb / n - mb * mb, cab = sab / n - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cab + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return static_cast<double>(total / count);
}

double corr_oracle(const std::vector<double>& a, const std::vector<double>& b)
{
    long double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    const long double n = static_cast<long double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
        saa += static_cast<long double>(a[i]) * a[i];
        sbb += static_cast<long double>(b[i]) * b[i];
        sab += static_cast<long double>(a[i]) * b[i];
    }
    return static_cast<double>((n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb)));
}

} // namespace

TEST_CASE("ssim matches a direct formula evaluation on fixed 8x8 pairs")
{
    for (unsigned seed = 1; seed <= 5; ++seed) {
        const Slice2D a = random_slice(8, 8, seed);
        Slice2D b = a;
        std::mt19937 rng(seed + 100);
        std::normal_distribution<double> n(0.0, 0.4);
        for (double& v : b.values)
            v = wrap(v + n(rng));
        CHECK(std::abs(ssim(a, b, 3, 2.0) - ssim_oracle(a, b, 3, 2.0)) <= 1e-12);
        CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b, 7, kTwoPi)) <= 1e-12);
    }
}

TEST_CASE("ssim identities and bounds")
{
    const Slice2D a = random_slice(12, 9, 7);
    CHECK(ssim(a, a) == 1.0);
    CHECK(phase_ssim(a, a, SsimMode::sincos) == 1.0);
    for (unsigned seed = 0; seed < 20; ++seed) {
        const Slice2D x = random_slice(12, 9, 2 * seed), y = random_slice(12, 9, 2 * seed + 1);
        for (SsimMode mode : {SsimMode::raw, SsimMode::sincos}) {
            const double xy = phase_ssim(x, y, mode), yx = phase_ssim(y, x, mode);
            CHECK(std::abs(xy - yx) <= 1e-12);
            CHECK(xy <= 1.0);
        }
    }

    Slice2D checker{9, 9, std::vector<double>(81)};
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x)
            checker.values[static_cast<std::size_t>(y * 9 + x)] = (x + y) % 2 ? 1.0 : -1.0;
    Slice2D neg = checker;
    for (double& v : neg.values)
        v = -v;
    CHECK(ssim(checker, neg) < 0.0);

    CHECK_THROWS_AS(ssim(a, random_slice(9, 12, 1)), Error);
    CHECK_THROWS_AS(ssim(a, a, 4), Error);
    CHECK_THROWS_AS(ssim(a, a, 11), Error);
}

TEST_CASE("ssim mask keeps windows by centre pixel")
{
    const Slice2D a = random_slice(10, 10, 3), b = random_slice(10, 10, 4);
    const std::vector<unsigned char> all(100, 1);
    CHECK(ssim(a, b, 7, kTwoPi, all) == ssim(a, b));
    std::vector<unsigned char> none(100, 0);
    CHECK_THROWS_AS(ssim(a, b, 7, kTwoPi, none), Error);
    // Only the window centred at (3, 3) survives.
    none[3 * 10 + 3] = 1;
    Slice2D sa{7, 7, {}}, sb{7, 7, {}};
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 7; ++x) {
            sa.values.push_back(a.at(x, y));
            sb.values.push_back(b.at(x, y));
        }
    CHECK(std::abs(ssim(a, b, 7, kTwoPi, none) - ssim_oracle(sa, sb, 7, kTwoPi)) <= 1e-12);
}

TEST_CASE("corr matches the direct formula and is affine invariant")
{
    std::mt19937 rng(11);
    std::normal_distribution<double> n01;
    std::vector<double> a(64), b(64);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = n01(rng);
        b[i] = 0.5 * a[i] + n01(rng);
    }
    CHECK(std::abs(corr(a, b) - corr_oracle(a, b)) <= 1e-12);
    CHECK(std::abs(corr(a, a) - 1.0) <= 1e-12);

    std::vector<double> affine(b.size()), scaled(a.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        affine[i] = 2.0 * b[i] + 3.0;
        scaled[i] = 0.25 * a[i] - 7.0;
    }
    CHECK(std::abs(corr(a, affine) - corr(a, b)) <= 1e-12);
    CHECK(std::abs(corr(scaled, b) - corr(a, b)) <= 1e-12);
    CHECK(std::abs(corr(scaled, a) - 1.0) <= 1e-12);

    const std::vector<double> flat(64, 2.0);
    try {
        (void)corr(a, flat);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numerical);
        CHECK(std::string(e.what()) == "degenerate input");
    }
    CHECK_THROWS_AS(corr(a, std::vector<double>(3, 1.0)), Error);
}

TEST_CASE("endpoint error")
{
    const Grid3 g({10, 9, 8}, {1.875, 1.875, 6.0});
    const VectorVolume truth = test::vector_field(g, FieldKind::displacement, [](const Vec3& p) {
        return Vec3{std::sin(p.y / 7.0), 0.3 * p.x / 10.0, 0.0};
    });
    const EndpointError same = endpoint_error(truth, truth);
    CHECK(same.median_mm == 0.0);
    CHECK(same.max_mm == 0.0);

    VectorVolume shifted = truth;
    for (Vec3& v : shifted.values())
        v.x += 1.0;
    const EndpointError one = endpoint_error(shifted, truth);
    CHECK(one.median_mm == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(one.max_mm == doctest::Approx(1.0).epsilon(1e-12));

    // A corner voxel outside the margin is reported per voxel but not summarized.
    VectorVolume spike = truth;
    spike.at(0, 0, 0).z += 50.0;
    const EndpointError e = endpoint_error(spike, truth, 2);
    CHECK(e.max_mm == 0.0);
    CHECK(e.per_voxel.at(0, 0, 0) == doctest::Approx(50.0));
    CHECK(endpoint_error(spike, truth, 0).max_mm == doctest::Approx(50.0));
    CHECK_THROWS_AS(endpoint_error(truth, truth, 4), Error);
    CHECK_THROWS_AS(endpoint_error(truth, VectorVolume(Grid3({10, 9, 7}, {1.875, 1.875, 6.0}), FieldKind::displacement)),
                    Error);
}

TEST_CASE("tag jump fraction")
{
    const Grid3 g({20, 12, 10}, {1.875, 1.875, 6.0});
    const TagPattern pat = TagPattern::axis_aligned({12.0, 12.0, 24.0});
    const VectorVolume truth = test::vector_field(g, FieldKind::displacement, [](const Vec3& p) {
        return Vec3{0.2 * std::sin(p.y / 9.0), 0.1, 0.0};
    });
    CHECK(detect_tag_jump(truth, truth, pat).overall == 0.0);

    // A full-period x offset on the half of the volume with i < 10.
    VectorVolume est = truth;
    for (int k = 0; k < g.dim(2); ++k)
        for (int j = 0; j < g.dim(1); ++j)
            for (int i = 0; i < 10; ++i)
                est.at(i, j, k).x += 12.0;
    const JumpFraction jf = detect_tag_jump(est, truth, pat, 3);
    // Interior i runs 3..16: 7 of 14 columns are shifted.
    CHECK(jf.per_direction[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(jf.per_direction[1] == 0.0);
    CHECK(jf.per_direction[2] == 0.0);
    CHECK(jf.overall == jf.per_direction[0]);

    // Sub-threshold errors never count.
    VectorVolume near = truth;
    for (Vec3& v : near.values())
        v.x += 5.9;
    CHECK(detect_tag_jump(near, truth, pat).overall == 0.0);

    // Shifting both sides by whole periods cancels.
    for (int periods : {-2, 1, 3}) {
        VectorVolume a = est, b = truth;
        for (std::size_t m = 0; m < a.size(); ++m) {
            a[m] += Vec3{12.0 * periods, 0.0, 24.0 * periods};
            b[m] += Vec3{12.0 * periods, 0.0, 24.0 * periods};
        }
        const JumpFraction s = detect_tag_jump(a, b, pat, 3);
        for (std::size_t d = 0; d < 3; ++d)
            CHECK(s.per_direction[d] == jf.per_direction[d]);
    }
}

TEST_CASE("deformed phase")
{
    const Grid3 g({16, 16, 8}, {1.875, 1.875, 6.0});
    PhaseSet set;
    for (std::size_t d = 0; d < 3; ++d) {
        set.phases[d] = test::scalar_field(g, [d](const Vec3& p) { return wrap(0.5 * p[static_cast<int>(d)] + 0.3); });
        set.magnitudes[d] = ScalarVolume(g, 1.0);
    }
    const PhaseSet same = deformed_phase(VectorVolume(g, FieldKind::displacement), set);
    for (std::size_t d = 0; d < 3; ++d)
        for (std::size_t m = 0; m < g.size(); ++m) {
            CHECK(std::abs(wrap(same.phases[d][m] - set.phases[d][m])) <= 1e-12);
            CHECK(same.magnitudes[d][m] == 1.0);
        }
    CHECK_THROWS_AS(deformed_phase(VectorVolume(Grid3({16, 16, 7}, {1.875, 1.875, 6.0}), FieldKind::displacement), set),
                    Error);
}

TEST_CASE("deformed phase under phantom ground truth matches the extracted phase")
{
    PhantomParams p;
    p.dims = {32, 32, 8};
    p.frames = 6;
    p.ramp_end_frame = 6;
    p.tag_period_mm = 12.0;
    p.peak_half_periods = 0.6;
    p.shear_wavelength_mm = 240.0;
    p.secondary_wavelength_mm = 60.0;
    const PhantomSequence seq = make_sequence(p);
    const auto specs = default_filter_specs(seq.pattern);
    const PhaseSet first = extract_phase_set(seq.frames[0], specs);
    const PhaseSet last = extract_phase_set(seq.frames[5], specs);
    const PhaseSet def = deformed_phase(ground_truth_displacement(seq.model, seq.grid, 6), first);
    for (std::size_t d = 0; d < 3; ++d) {
        std::vector<double> err;
        for (std::size_t m = 0; m < seq.grid.size(); ++m) {
            err.push_back(std::abs(wrap(def.phases[d][m] - last.phases[d][m])));
            CHECK(def.phases[d][m] >= -kPi);
            CHECK(def.phases[d][m] < kPi);
        }
        std::nth_element(err.begin(), err.begin() + static_cast<std::ptrdiff_t>(err.size() / 2), err.end());
        CHECK(err[err.size() / 2] < 0.1);
    }
}

namespace {

std::vector<PhaseSet> constant_sequence(const Grid3& g, int frames)
{
    PhaseSet set;
    for (std::size_t d = 0; d < 3; ++d) {
        set.phases[d] = test::scalar_field(g, [d](const Vec3& p) {
            return wrap(0.7 * p[static_cast<int>(d)] + 0.2 * std::sin(p[(static_cast<int>(d) + 1) % 3]));
        });
        set.magnitudes[d] = ScalarVolume(g, 1.0);
    }
    return std::vector<PhaseSet>(static_cast<std::size_t>(frames), set);
}

SequenceEstimate identity_estimate(Method m, const Grid3& g, int frames)
{
    SequenceEstimate e;
    e.method = m;
    e.deformations.assign(static_cast<std::size_t>(frames - 1), VectorVolume(g, FieldKind::displacement));
    return e;
}

} // namespace

TEST_CASE("evaluate_sequence on an identical-frames sequence")
{
    const Grid3 g({12, 10, 5}, {1.875, 1.875, 6.0});
    const int frames = 4;
    const auto phases = constant_sequence(g, frames);
    const std::vector<SequenceEstimate> est{identity_estimate(Method::direct, g, frames),
                                            identity_estimate(Method::incremental, g, frames),
                                            identity_estimate(Method::new_start, g, frames)};
    EvalOptions opt;
    opt.margin_voxels = 2;
    const EvaluationResult r = evaluate_sequence(est, phases, nullptr, opt);
    REQUIRE(r.rows.size() == est.size() * (frames - 1) * (g.dim(2) + 1));
    CHECK(r.worst_slices.size() == est.size() * (frames - 1));
    std::size_t at = 0;
    for (const SequenceEstimate& e : est)
        for (int n = 2; n <= frames; ++n)
            for (int s = 0; s <= g.dim(2); ++s) {
                const MetricRow& row = r.rows[at++];
                CHECK(row.method == e.method);
                CHECK(row.frame == n);
                CHECK(row.slice == (s == g.dim(2) ? -1 : s));
                CHECK(row.ssim == doctest::Approx(1.0).epsilon(1e-12));
                CHECK(row.corr == doctest::Approx(1.0).epsilon(1e-12));
                CHECK(std::isnan(row.median_epe_mm));
            }

    // Axis and direction choices change the slice count only.
    opt.slice_axis = 0;
    opt.directions = {0, 1, 2};
    opt.ssim_mode = SsimMode::sincos;
    opt.ssim_window = 3;
    const EvaluationResult rx = evaluate_sequence(std::span(est).first(1), phases, nullptr, opt);
    CHECK(rx.rows.size() == (frames - 1) * (g.dim(0) + 1));
    for (const MetricRow& row : rx.rows)
        CHECK(row.ssim == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("evaluate_sequence with ground truth, masks and worker threads")
{
    PhantomParams p;
    p.dims = {16, 16, 8};
    p.frames = 3;
    p.ramp_end_frame = 3;
    p.tag_period_mm = 10.0;
    p.peak_half_periods = 0.4;
    p.shear_wavelength_mm = 120.0;
    p.secondary_wavelength_mm = 30.0;
    const PhantomSequence seq = make_sequence(p);
    const auto specs = default_filter_specs(seq.pattern);
    std::vector<PhaseSet> phases;
    for (const ScalarVolume& f : seq.frames)
        phases.push_back(extract_phase_set(f, specs));

    SequenceEstimate truth_est;
    truth_est.method = Method::direct;
    for (int n = 2; n <= 3; ++n)
        truth_est.deformations.push_back(ground_truth_displacement(seq.model, seq.grid, n));
    SequenceEstimate shifted = truth_est;
    shifted.method = Method::new_start;
    for (VectorVolume& d : shifted.deformations)
        for (Vec3& v : d.values())
            v.x += 7.5;
    const std::vector<SequenceEstimate> est{truth_est, shifted};
    const GroundTruth gt{seq.model, seq.pattern};

    EvalOptions opt;
    const EvaluationResult one = evaluate_sequence(est, phases, &gt, opt);
    opt.jobs = 4;
    const EvaluationResult four = evaluate_sequence(est, phases, &gt, opt);
    REQUIRE(one.rows.size() == four.rows.size());
    for (std::size_t i = 0; i < one.rows.size(); ++i) {
        CHECK(one.rows[i].ssim == four.rows[i].ssim);
        CHECK(one.rows[i].corr == four.rows[i].corr);
        CHECK(one.rows[i].median_epe_mm == four.rows[i].median_epe_mm);
    }

    double mean_ssim = 0.0;
    for (const MetricRow& row : one.rows) {
        if (row.method == Method::direct) {
            CHECK(row.median_epe_mm == 0.0);
            CHECK(row.jump_fraction == 0.0);
        } else {
            CHECK(row.median_epe_mm == doctest::Approx(7.5));
            CHECK(row.jump_fraction == 1.0);
        }
        if (row.slice >= 0 && row.method == Method::direct && row.frame == 3)
            mean_ssim += row.ssim / seq.grid.dim(2);
    }
    const MetricRow& volume = one.rows[seq.grid.dim(2) * 2 + 1];
    CHECK(volume.slice == -1);
    CHECK(volume.frame == 3);
    CHECK(volume.ssim == doctest::Approx(mean_ssim).epsilon(1e-12));

    for (const MetricRow& w : one.worst_slices) {
        CHECK(w.slice >= 0);
        for (const MetricRow& row : one.rows)
            if (row.method == w.method && row.frame == w.frame && row.slice >= 0)
                CHECK(w.ssim <= row.ssim);
    }

    opt.mask_magnitude = true;
    opt.mask_fraction = 0.5;
    const EvaluationResult masked = evaluate_sequence(est, phases, &gt, opt);
    CHECK(masked.rows.size() == one.rows.size());

    EvalOptions bad;
    bad.directions = {3};
    CHECK_THROWS_AS(evaluate_sequence(est, phases, &gt, bad), Error);
    bad.directions = {};
    CHECK_THROWS_AS(evaluate_sequence(est, phases, &gt, bad), Error);
    CHECK_THROWS_AS(evaluate_sequence(est, std::span(phases).first(2), &gt), Error);
}

TEST_SUITE_END();

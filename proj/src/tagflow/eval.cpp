#include "tagflow/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tagflow/error.hpp"
#include "tagflow/parallel.hpp"
#include "tagflow/volume_ops.hpp"

namespace tagflow {

PhaseSet deformed_phase(const VectorVolume& psi, const PhaseSet& first)
{
    require_same_grid(psi.grid(), first.grid());
    PhaseSet out;
    out.specs = first.specs;
    for (std::size_t d = 0; d < 3; ++d) {
        out.phases[d] = warp_phase(first.phases[d], psi);
        out.magnitudes[d] = warp_scalar(first.magnitudes[d], psi);
    }
    return out;
}

Slice2D extract_slice(const ScalarVolume& v, int axis, int index)
{
    const Grid3& g = v.grid();
    if (axis < 0 || axis > 2)
        fail(ErrorKind::invalid_argument, "slice axis must be 0, 1 or 2");
    if (index < 0 || index >= g.dim(axis))
        fail(ErrorKind::invalid_argument, "slice index out of range");
    const int a0 = axis == 0 ? 1 : 0;
    const int a1 = axis == 2 ? 1 : 2;
    Slice2D s;
    s.width = g.dim(a0);
    s.height = g.dim(a1);
    s.values.resize(static_cast<std::size_t>(s.width) * static_cast<std::size_t>(s.height));
    std::array<int, 3> ijk{};
    ijk[static_cast<std::size_t>(axis)] = index;
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
            ijk[static_cast<std::size_t>(a0)] = x;
            ijk[static_cast<std::size_t>(a1)] = y;
            s.values[static_cast<std::size_t>(y) * static_cast<std::size_t>(s.width) + static_cast<std::size_t>(x)] =
                v.at(ijk[0], ijk[1], ijk[2]);
        }
    return s;
}

double ssim(const Slice2D& a, const Slice2D& b, int window, double dynamic_range, std::span<const unsigned char> mask)
{
    if (a.width != b.width || a.height != b.height)
        fail(ErrorKind::invalid_argument, "ssim: shape mismatch");
    if (window < 1 || window % 2 == 0)
        fail(ErrorKind::invalid_argument, "ssim: window must be odd and positive");
    if (!(dynamic_range > 0.0))
        fail(ErrorKind::invalid_argument, "ssim: dynamic range must be > 0");
    if (window > a.width || window > a.height)
        fail(ErrorKind::invalid_argument, "ssim: window larger than slice");
    if (!mask.empty() && mask.size() != a.values.size())
        fail(ErrorKind::invalid_argument, "ssim: mask size mismatch");

    const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
    const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
    const double inv_n = 1.0 / static_cast<double>(window * window);
    const int half = window / 2;
    double total = 0.0;
    std::size_t count = 0;
    for (int y0 = 0; y0 + window <= a.height; ++y0)
        for (int x0 = 0; x0 + window <= a.width; ++x0) {
            if (!mask.empty() &&
                !mask[static_cast<std::size_t>(y0 + half) * static_cast<std::size_t>(a.width) +
                      static_cast<std::size_t>(x0 + half)])
                continue;
            double ma = 0.0, mb = 0.0;
            for (int y = y0; y < y0 + window; ++y)
                for (int x = x0; x < x0 + window; ++x) {
                    ma += a.at(x, y);
                    mb += b.at(x, y);
                }
            ma *= inv_n;
            mb *= inv_n;
            double va = 0.0, vb = 0.0, cab = 0.0;
            for (int y = y0; y < y0 + window; ++y)
                for (int x = x0; x < x0 + window; ++x) {
                    const double da = a.at(x, y) - ma;
                    const double db = b.at(x, y) - mb;
                    va += da * da;
                    vb += db * db;
                    cab += da * db;
                }
            va *= inv_n;
            vb *= inv_n;
            cab *= inv_n;
            total += ((2.0 * ma * mb + c1) * (2.0 * cab + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    if (count == 0)
        fail(ErrorKind::invalid_argument, "ssim: no windows to average");
    return total / static_cast<double>(count);
}

double phase_ssim(const Slice2D& a, const Slice2D& b, SsimMode mode, int window, std::span<const unsigned char> mask)
{
    if (mode == SsimMode::raw)
        return ssim(a, b, window, kTwoPi, mask);
    auto channel = [](const Slice2D& s, double (*f)(double)) {
        Slice2D out = s;
        for (double& x : out.values)
            x = f(x);
        return out;
    };
    double (*cosf)(double) = std::cos;
    double (*sinf)(double) = std::sin;
    return 0.5 * (ssim(channel(a, cosf), channel(b, cosf), window, 2.0, mask) +
                  ssim(channel(a, sinf), channel(b, sinf), window, 2.0, mask));
}

double corr(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        fail(ErrorKind::invalid_argument, "corr: size mismatch");
    if (a.size() < 2)
        fail(ErrorKind::invalid_argument, "degenerate input");
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(a.size());
    mb /= static_cast<double>(b.size());
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (!(saa > 0.0) || !(sbb > 0.0))
        fail(ErrorKind::numerical, "degenerate input");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

namespace {

double median_inplace(std::vector<double>& v)
{
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    if (v.size() % 2 == 1)
        return v[mid];
    const double hi = v[mid];
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

void require_margin(const Grid3& g, int margin)
{
    if (margin < 0)
        fail(ErrorKind::invalid_argument, "margin must be >= 0");
    for (int a = 0; a < 3; ++a)
        if (2 * margin >= g.dim(a))
            fail(ErrorKind::invalid_argument, "margin leaves no interior voxels");
}

// Interior test that ignores one axis (-1 ignores none).
bool inside(const Grid3& g, int i, int j, int k, int margin, int skip_axis)
{
    const std::array<int, 3> p{i, j, k};
    for (int a = 0; a < 3; ++a) {
        if (a == skip_axis)
            continue;
        const int c = p[static_cast<std::size_t>(a)];
        if (c < margin || c >= g.dim(a) - margin)
            return false;
    }
    return true;
}

struct ErrorSummary {
    double median = std::numeric_limits<double>::quiet_NaN();
    double max = std::numeric_limits<double>::quiet_NaN();
    double jump = std::numeric_limits<double>::quiet_NaN();
};

// EPE and jump statistics over the voxels accepted by `keep`.
template <class Keep>
ErrorSummary summarize(const VectorVolume& est, const VectorVolume& truth, const TagPattern& pattern, Keep keep)
{
    const Grid3& g = est.grid();
    std::vector<double> epe;
    std::array<std::size_t, 3> jumps{};
    std::array<Vec3, 3> unit;
    std::array<double, 3> half_period{};
    for (int d = 0; d < 3; ++d) {
        unit[static_cast<std::size_t>(d)] = pattern.unit(d);
        half_period[static_cast<std::size_t>(d)] = 0.5 * pattern.period_mm(d);
    }
    for (int k = 0; k < g.dim(2); ++k)
        for (int j = 0; j < g.dim(1); ++j)
            for (int i = 0; i < g.dim(0); ++i) {
                if (!keep(i, j, k))
                    continue;
                const std::size_t m = g.index(i, j, k);
                const Vec3 e = est[m] - truth[m];
                epe.push_back(e.norm());
                for (std::size_t d = 0; d < 3; ++d)
                    if (std::abs(e.dot(unit[d])) > half_period[d])
                        ++jumps[d];
            }
    ErrorSummary s;
    if (epe.empty())
        return s;
    const double n = static_cast<double>(epe.size());
    s.max = *std::max_element(epe.begin(), epe.end());
    s.median = median_inplace(epe);
    s.jump = static_cast<double>(*std::max_element(jumps.begin(), jumps.end())) / n;
    return s;
}

} // namespace

EndpointError endpoint_error(const VectorVolume& estimate, const VectorVolume& truth, int margin)
{
    require_same_grid(estimate.grid(), truth.grid());
    const Grid3& g = estimate.grid();
    require_margin(g, margin);
    EndpointError r;
    r.per_voxel = ScalarVolume(g);
    std::vector<double> inner;
    for (int k = 0; k < g.dim(2); ++k)
        for (int j = 0; j < g.dim(1); ++j)
            for (int i = 0; i < g.dim(0); ++i) {
                const std::size_t m = g.index(i, j, k);
                const double e = (estimate[m] - truth[m]).norm();
                r.per_voxel[m] = e;
                if (g.interior(i, j, k, margin))
                    inner.push_back(e);
            }
    r.max_mm = *std::max_element(inner.begin(), inner.end());
    r.median_mm = median_inplace(inner);
    return r;
}

JumpFraction detect_tag_jump(const VectorVolume& estimate, const VectorVolume& truth, const TagPattern& pattern,
                             int margin)
{
    require_same_grid(estimate.grid(), truth.grid());
    const Grid3& g = estimate.grid();
    require_margin(g, margin);
    std::array<std::size_t, 3> hits{};
    std::size_t total = 0;
    for (int k = 0; k < g.dim(2); ++k)
        for (int j = 0; j < g.dim(1); ++j)
            for (int i = 0; i < g.dim(0); ++i) {
                if (!g.interior(i, j, k, margin))
                    continue;
                const std::size_t m = g.index(i, j, k);
                const Vec3 e = estimate[m] - truth[m];
                for (int d = 0; d < 3; ++d)
                    if (std::abs(e.dot(pattern.unit(d))) > 0.5 * pattern.period_mm(d))
                        ++hits[static_cast<std::size_t>(d)];
                ++total;
            }
    JumpFraction r;
    for (std::size_t d = 0; d < 3; ++d) {
        r.per_direction[d] = static_cast<double>(hits[d]) / static_cast<double>(total);
        r.overall = std::max(r.overall, r.per_direction[d]);
    }
    return r;
}

EvaluationResult evaluate_sequence(std::span<const SequenceEstimate> estimates, std::span<const PhaseSet> phases,
                                   const GroundTruth* truth, const EvalOptions& options)
{
    if (phases.size() < 2)
        fail(ErrorKind::invalid_argument, "evaluate_sequence: need at least 2 frames");
    const Grid3& g = phases[0].grid();
    for (const PhaseSet& p : phases)
        require_same_grid(g, p.grid());
    require_margin(g, options.margin_voxels);
    if (options.slice_axis < 0 || options.slice_axis > 2)
        fail(ErrorKind::invalid_argument, "slice axis must be 0, 1 or 2");
    if (options.directions.empty())
        fail(ErrorKind::invalid_argument, "no evaluation directions");
    for (int d : options.directions)
        if (d < 0 || d > 2)
            fail(ErrorKind::invalid_argument, "evaluation direction out of range");
    if (truth && truth->model.frames() != static_cast<int>(phases.size()))
        fail(ErrorKind::invalid_argument, "ground truth frame count does not match the sequence");
    for (const SequenceEstimate& e : estimates) {
        if (e.frames() != static_cast<int>(phases.size()))
            fail(ErrorKind::invalid_argument, "estimate frame count does not match the sequence");
        for (const VectorVolume& psi : e.deformations)
            require_same_grid(g, psi.grid());
    }

    const int axis = options.slice_axis;
    const int slices = g.dim(axis);
    const std::size_t frames = phases.size() - 1;
    const std::size_t per_frame = static_cast<std::size_t>(slices) + 1;

    // Reference slices and masks depend on the frame only.
    std::vector<std::vector<std::array<Slice2D, 3>>> ref(frames);
    std::vector<std::vector<std::vector<unsigned char>>> masks(frames);
    parallel_for(frames, options.jobs, [&](std::size_t f) {
        const PhaseSet& p = phases[f + 1];
        ref[f].resize(static_cast<std::size_t>(slices));
        masks[f].resize(static_cast<std::size_t>(slices));
        for (int s = 0; s < slices; ++s) {
            for (int d : options.directions)
                ref[f][static_cast<std::size_t>(s)][static_cast<std::size_t>(d)] =
                    extract_slice(p.phases[static_cast<std::size_t>(d)], axis, s);
            if (!options.mask_magnitude)
                continue;
            // A pixel counts when every evaluated channel is strong there.
            std::vector<unsigned char>& mask = masks[f][static_cast<std::size_t>(s)];
            for (int d : options.directions) {
                std::vector<double> all(p.magnitudes[static_cast<std::size_t>(d)].values().begin(),
                                        p.magnitudes[static_cast<std::size_t>(d)].values().end());
                const double threshold = options.mask_fraction * median_inplace(all);
                const Slice2D mag = extract_slice(p.magnitudes[static_cast<std::size_t>(d)], axis, s);
                if (mask.empty())
                    mask.assign(mag.values.size(), 1);
                for (std::size_t m = 0; m < mag.values.size(); ++m)
                    if (!(mag.values[m] > threshold))
                        mask[m] = 0;
            }
        }
    });

    std::vector<VectorVolume> truth_disp(truth ? frames : 0);
    if (truth)
        parallel_for(frames, options.jobs, [&](std::size_t f) {
            truth_disp[f] = ground_truth_displacement(truth->model, g, static_cast<int>(f) + 2);
        });

    const std::size_t jobs_total = estimates.size() * frames;
    std::vector<MetricRow> rows(jobs_total * per_frame);
    std::vector<MetricRow> worst(jobs_total);
    parallel_for(jobs_total, options.jobs, [&](std::size_t job) {
        const SequenceEstimate& est = estimates[job / frames];
        const std::size_t f = job % frames;
        const int frame = static_cast<int>(f) + 2;
        const PhaseSet deformed = deformed_phase(est.deformations[f], phases[0]);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        MetricRow* out = rows.data() + job * per_frame;
        double ssim_sum = 0.0, corr_sum = 0.0;
        for (int s = 0; s < slices; ++s) {
            const auto& mask = masks[f][static_cast<std::size_t>(s)];
            double sv = 0.0, cv = 0.0;
            for (int d : options.directions) {
                const Slice2D a = extract_slice(deformed.phases[static_cast<std::size_t>(d)], axis, s);
                const Slice2D& b = ref[f][static_cast<std::size_t>(s)][static_cast<std::size_t>(d)];
                sv += phase_ssim(a, b, options.ssim_mode, options.ssim_window, mask);
                if (mask.empty()) {
                    cv += corr(a.values, b.values);
                } else {
                    std::vector<double> ma, mb;
                    for (std::size_t m = 0; m < mask.size(); ++m)
                        if (mask[m]) {
                            ma.push_back(a.values[m]);
                            mb.push_back(b.values[m]);
                        }
                    cv += corr(ma, mb);
                }
            }
            const double nd = static_cast<double>(options.directions.size());
            MetricRow& r = out[s];
            r.method = est.method;
            r.frame = frame;
            r.slice = s;
            r.ssim = sv / nd;
            r.corr = cv / nd;
            r.median_epe_mm = r.max_epe_mm = r.jump_fraction = nan;
            if (truth) {
                const ErrorSummary e =
                    summarize(est.deformations[f], truth_disp[f], truth->pattern, [&](int i, int j, int k) {
                        const std::array<int, 3> p{i, j, k};
                        return p[static_cast<std::size_t>(axis)] == s &&
                               inside(g, i, j, k, options.margin_voxels, axis);
                    });
                r.median_epe_mm = e.median;
                r.max_epe_mm = e.max;
                r.jump_fraction = e.jump;
            }
            ssim_sum += r.ssim;
            corr_sum += r.corr;
        }
        MetricRow& vol = out[slices];
        vol.method = est.method;
        vol.frame = frame;
        vol.slice = -1;
        vol.ssim = ssim_sum / slices;
        vol.corr = corr_sum / slices;
        vol.median_epe_mm = vol.max_epe_mm = vol.jump_fraction = nan;
        if (truth) {
            const ErrorSummary e = summarize(est.deformations[f], truth_disp[f], truth->pattern,
                                             [&](int i, int j, int k) { return inside(g, i, j, k, options.margin_voxels, -1); });
            vol.median_epe_mm = e.median;
            vol.max_epe_mm = e.max;
            vol.jump_fraction = e.jump;
        }
        worst[job] = *std::min_element(out, out + slices,
                                       [](const MetricRow& a, const MetricRow& b) { return a.ssim < b.ssim; });
    });
    return {std::move(rows), std::move(worst)};
}

} // namespace tagflow

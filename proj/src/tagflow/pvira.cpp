#include "tagflow/pvira.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <spdlog/spdlog.h>

#include "tagflow/error.hpp"
#include "tagflow/fft.hpp"
#include "tagflow/volume_ops.hpp"

namespace tagflow {

void PviraParams::validate() const
{
    for (int a = 0; a < 3; ++a)
        if (!(sigma_fluid_mm[a] >= 0.0) || !(sigma_diffusion_mm[a] >= 0.0))
            fail(ErrorKind::config, "pvira sigmas must be >= 0");
    if (!(sigma_i > 0.0))
        fail(ErrorKind::config, "pvira.sigma_i must be > 0");
    if (max_iters < 1)
        fail(ErrorKind::config, "pvira.max_iters must be >= 1");
    if (!(step_max_voxels > 0.0))
        fail(ErrorKind::config, "pvira.step_max_voxels must be > 0");
    if (!(magnitude_threshold >= 0.0))
        fail(ErrorKind::config, "pvira.magnitude_threshold must be >= 0");
    if (!(stop_tol >= 0.0))
        fail(ErrorKind::config, "pvira.stop_tol must be >= 0");
    if (taper_voxels < 0)
        fail(ErrorKind::config, "pvira.taper_voxels must be >= 0");
}

namespace {

double median_of(std::span<const double> values)
{
    std::vector<double> v(values.begin(), values.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    if (v.size() % 2 == 1)
        return v[mid];
    const double hi = v[mid];
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

// Difference of two wrapped phases, rewrapped.
inline double wrap_difference(double d)
{
    if (d >= kPi)
        return d - kTwoPi;
    if (d < -kPi)
        return d + kTwoPi;
    return d;
}

// Everything about a (moving, fixed) pair that does not change between
// iterations.
class ForceContext {
public:
    ForceContext(const PhaseSet& moving, const PhaseSet& fixed, const PviraParams& params)
        : grid_(fixed.grid()), params_(params), fixed_(fixed)
    {
        require_same_grid(moving.grid(), fixed.grid());
        const std::size_t n = grid_.size();
        samples_.resize(n);
        for (std::size_t d = 0; d < 3; ++d) {
            for (std::size_t m = 0; m < n; ++m) {
                samples_[m][2 * d] = moving.phases[d][m];
                samples_[m][2 * d + 1] = moving.magnitudes[d][m];
            }
            fixed_grad_[d] = wrapped_gradient(fixed.phases[d]);
            epsilon_[d] = params.magnitude_threshold * median_of(fixed.magnitudes[d].values());
        }
    }

    struct Force {
        VectorVolume update;
        double mean_phase_error = 0.0;
    };

    Force evaluate(const VectorVolume& disp) const
    {
        require_same_grid(grid_, disp.grid());
        const std::size_t n = grid_.size();
        std::array<ScalarVolume, 3> warped{ScalarVolume(grid_), ScalarVolume(grid_), ScalarVolume(grid_)};
        std::array<std::vector<double>, 3> warped_mag;
        for (auto& m : warped_mag)
            m.resize(n);
        // Sample points that leave the grid see only clamped edge values, which no
        // displacement can match; their force is faded out.
        std::vector<double> keep(n, 1.0);

        const Vec3 h = grid_.spacing();
        const std::size_t sy = static_cast<std::size_t>(grid_.dim(0));
        const std::size_t sz = sy * static_cast<std::size_t>(grid_.dim(1));
        for (int k = 0; k < grid_.dim(2); ++k)
            for (int j = 0; j < grid_.dim(1); ++j)
                for (int i = 0; i < grid_.dim(0); ++i) {
                    const std::size_t q = grid_.index(i, j, k);
                    const Vec3& d = disp[q];
                    const Vec3 c{i + d.x / h.x, j + d.y / h.y, k + d.z / h.z};
                    keep[q] = std::min({edge_weight(c.x, grid_.dim(0)), edge_weight(c.y, grid_.dim(1)),
                                        edge_weight(c.z, grid_.dim(2))});
                    int i0, j0, k0;
                    double tx, ty, tz;
                    std::size_t ex, ey, ez;
                    locate(c.x, grid_.dim(0), i0, tx, ex);
                    locate(c.y, grid_.dim(1), j0, ty, ey);
                    locate(c.z, grid_.dim(2), k0, tz, ez);
                    ey *= sy;
                    ez *= sz;
                    const std::size_t b = grid_.index(i0, j0, k0);
                    const double w[8] = {(1 - tx) * (1 - ty) * (1 - tz), tx * (1 - ty) * (1 - tz),
                                         (1 - tx) * ty * (1 - tz),       tx * ty * (1 - tz),
                                         (1 - tx) * (1 - ty) * tz,       tx * (1 - ty) * tz,
                                         (1 - tx) * ty * tz,             tx * ty * tz};
                    const std::size_t o[8] = {b,      b + ex,      b + ey,      b + ey + ex,
                                              b + ez, b + ez + ex, b + ez + ey, b + ez + ey + ex};
                    // Blend phase offsets from the base corner so the interpolant is
                    // linear in angle.
                    const auto& base = samples_[b];
                    std::array<double, 6> acc{};
                    for (int t = 0; t < 8; ++t) {
                        const auto& smp = samples_[o[t]];
                        for (std::size_t d = 0; d < 3; ++d) {
                            acc[2 * d] += w[t] * wrap_difference(smp[2 * d] - base[2 * d]);
                            acc[2 * d + 1] += w[t] * smp[2 * d + 1];
                        }
                    }
                    for (std::size_t d = 0; d < 3; ++d) {
                        warped[d][q] = wrap(base[2 * d] + acc[2 * d]);
                        warped_mag[d][q] = acc[2 * d + 1];
                    }
                }

        std::array<VectorVolume, 3> warped_grad;
        for (std::size_t d = 0; d < 3; ++d)
            warped_grad[d] = wrapped_gradient(warped[d]);

        Force out{VectorVolume(grid_, FieldKind::displacement), 0.0};
        const double cap = params_.step_max_voxels * grid_.min_spacing();
        const double inv_sigma2 = 1.0 / (params_.sigma_i * params_.sigma_i);
        double err_sum = 0.0;
        std::size_t err_count = 0;
        for (std::size_t q = 0; q < n; ++q) {
            if (keep[q] == 0.0)
                continue;
            Vec3 u;
            int used = 0;
            for (std::size_t d = 0; d < 3; ++d) {
                if (!(std::min(warped_mag[d][q], fixed_.magnitudes[d][q]) > epsilon_[d]))
                    continue;
                ++used;
                const double e = wrap_difference(fixed_.phases[d][q] - warped[d][q]);
                err_sum += std::abs(e);
                ++err_count;
                const Vec3 g = 0.5 * (fixed_grad_[d][q] + warped_grad[d][q]);
                const double denom = g.dot(g) + e * e * inv_sigma2;
                if (denom > 0.0)
                    u += g * (e / denom);
            }
            if (used == 0)
                continue;
            u *= keep[q] / used;
            const double len = u.norm();
            if (len > cap)
                u *= cap / len;
            out.update[q] = u;
        }
        out.mean_phase_error = err_count ? err_sum / static_cast<double>(err_count) : 0.0;
        return out;
    }

private:
    // 1 on the lattice, falling linearly to 0 one voxel outside it; a hard
    // cut lets face voxels flip in and out between iterations.
    static double edge_weight(double c, int n)
    {
        const double out = std::max(-c, c - (n - 1));
        return std::clamp(1.0 - out, 0.0, 1.0);
    }

    // Collapses onto the last plane there, so lattice points are exact.
    static void locate(double c, int n, int& i0, double& t, std::size_t& step)
    {
        c = std::clamp(c, 0.0, static_cast<double>(n - 1));
        i0 = static_cast<int>(c);
        if (i0 >= n - 1) {
            i0 = n - 1;
            t = 0.0;
            step = 0;
        } else {
            t = c - i0;
            step = 1;
        }
    }

    Grid3 grid_;
    PviraParams params_;
    const PhaseSet& fixed_;
    // Per voxel: (phase, magnitude) of the moving image for each direction.
    std::vector<std::array<double, 6>> samples_;
    std::array<VectorVolume, 3> fixed_grad_;
    std::array<double, 3> epsilon_{};
};

VectorVolume add(const VectorVolume& a, const VectorVolume& b)
{
    VectorVolume out = a;
    for (std::size_t n = 0; n < out.size(); ++n)
        out[n] += b[n];
    return out;
}

double taper_weight(int i, int n, int taper)
{
    if (taper <= 0)
        return 1.0;
    const int dist = std::min(i, n - 1 - i);
    if (dist >= taper)
        return 1.0;
    return 0.5 * (1.0 - std::cos(kPi * dist / taper));
}

} // namespace

VectorVolume demons_update(const PhaseSet& moving, const PhaseSet& fixed, const VectorVolume& current_disp,
                           const PviraParams& params)
{
    require_kind(current_disp, FieldKind::displacement, "demons_update");
    return ForceContext(moving, fixed, params).evaluate(current_disp).update;
}

VectorVolume exp_velocity(const VectorVolume& velocity)
{
    require_kind(velocity, FieldKind::velocity, "exp_velocity");
    if (!velocity.all_finite())
        fail(ErrorKind::numerical, "exp_velocity: non-finite velocity");
    const double limit = 0.5 * velocity.grid().min_spacing();
    const double vmax = velocity.max_norm();
    int squarings = 0;
    double scale = 1.0;
    while (vmax * scale > limit) {
        scale *= 0.5;
        ++squarings;
    }
    VectorVolume d = velocity.with_kind(FieldKind::displacement);
    for (auto& x : d.values())
        x *= scale;
    for (int s = 0; s < squarings; ++s)
        d = compose_displacements(d, d);
    return d;
}

VectorVolume project_divergence_free(const VectorVolume& velocity, int taper_voxels)
{
    const Grid3& g = velocity.grid();
    const auto& dims = g.dims();
    const int nx = dims[0], ny = dims[1], nz = dims[2];

    std::array<std::vector<double>, 3> taper;
    for (int a = 0; a < 3; ++a) {
        auto& t = taper[static_cast<std::size_t>(a)];
        t.resize(static_cast<std::size_t>(g.dim(a)));
        for (int i = 0; i < g.dim(a); ++i)
            t[static_cast<std::size_t>(i)] = taper_weight(i, g.dim(a), taper_voxels);
    }

    // Periodic central-difference divergence.
    RealBuffer div(g.size());
    const double cx = 0.5 / g.spacing().x, cy = 0.5 / g.spacing().y, cz = 0.5 / g.spacing().z;
    for (int k = 0; k < nz; ++k) {
        const int kp = k + 1 == nz ? 0 : k + 1, km = k == 0 ? nz - 1 : k - 1;
        for (int j = 0; j < ny; ++j) {
            const int jp = j + 1 == ny ? 0 : j + 1, jm = j == 0 ? ny - 1 : j - 1;
            for (int i = 0; i < nx; ++i) {
                const int ip = i + 1 == nx ? 0 : i + 1, im = i == 0 ? nx - 1 : i - 1;
                const double dv = (velocity.at(ip, j, k).x - velocity.at(im, j, k).x) * cx +
                                  (velocity.at(i, jp, k).y - velocity.at(i, jm, k).y) * cy +
                                  (velocity.at(i, j, kp).z - velocity.at(i, j, km).z) * cz;
                div[g.index(i, j, k)] = dv;
            }
        }
    }
    const int hx = nx / 2 + 1;
    ComplexBuffer spec(half_spectrum_size(dims));
    fft3_r2c(div, spec, dims);

    // Symbol of the central difference along each axis is i*sin(w h)/h; it
    // vanishes exactly at DC and Nyquist.
    std::array<std::vector<double>, 3> sym;
    for (int a = 0; a < 3; ++a) {
        auto& s = sym[static_cast<std::size_t>(a)];
        const int n = g.dim(a);
        s.resize(static_cast<std::size_t>(n));
        const double h = g.spacing()[a];
        for (int b = 0; b < n; ++b)
            s[static_cast<std::size_t>(b)] = (b == 0 || 2 * b == n) ? 0.0 : std::sin(bin_frequency(b, n, h) * h) / h;
    }

    // Potential p solves L p = div with L = -(sx^2 + sy^2 + sz^2); modes
    // the central-difference operator cannot see are left alone.
    auto half_index = [&](int i, int j, int k) {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(hx) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(ny) * k);
    };
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < hx; ++i) {
                const double sx = sym[0][static_cast<std::size_t>(i)];
                const double sy = sym[1][static_cast<std::size_t>(j)];
                const double sz = sym[2][static_cast<std::size_t>(k)];
                const double lap = -(sx * sx + sy * sy + sz * sz);
                auto& c = spec[half_index(i, j, k)];
                c = lap != 0.0 ? c / lap : 0.0;
            }

    VectorVolume out = velocity;
    ComplexBuffer comp(spec.size());
    RealBuffer grad(g.size());
    for (int a = 0; a < 3; ++a) {
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < hx; ++i) {
                    const int b = a == 0 ? i : (a == 1 ? j : k);
                    const double s = sym[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
                    const std::size_t q = half_index(i, j, k);
                    comp[q] = std::complex<double>(0.0, s) * spec[q];
                }
        fft3_c2r(comp, grad, dims);
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i) {
                    // Correction fades out toward the faces.
                    const double w = taper[0][static_cast<std::size_t>(i)] * taper[1][static_cast<std::size_t>(j)] *
                                     taper[2][static_cast<std::size_t>(k)];
                    out.at(i, j, k)[a] -= w * grad[g.index(i, j, k)];
                }
    }
    return out;
}

RegistrationResult register_pair(const PhaseSet& moving, const PhaseSet& fixed, const PviraParams& params,
                                 const std::optional<VectorVolume>& init_velocity)
{
    params.validate();
    require_same_grid(moving.grid(), fixed.grid());
    const Grid3& g = fixed.grid();

    VectorVolume v(g, FieldKind::velocity);
    if (init_velocity) {
        require_same_grid(g, init_velocity->grid());
        require_kind(*init_velocity, FieldKind::velocity, "register_pair init");
        if (!init_velocity->all_finite())
            fail(ErrorKind::numerical, "numerical divergence at iteration 0: non-finite initial velocity");
        v = *init_velocity;
    }

    const ForceContext force(moving, fixed, params);
    const double stop = params.stop_tol * g.min_spacing();
    RegistrationResult result;
    for (int it = 1; it <= params.max_iters; ++it) {
        const VectorVolume phi = exp_velocity(v);
        ForceContext::Force f = force.evaluate(phi);
        const VectorVolume u = gaussian_smooth(f.update, params.sigma_fluid_mm).with_kind(FieldKind::velocity);
        VectorVolume next = gaussian_smooth(add(v, u), params.sigma_diffusion_mm);
        if (params.incompressible)
            next = project_divergence_free(next, params.taper_voxels);
        if (!next.all_finite())
            fail(ErrorKind::numerical, "numerical divergence at iteration " + std::to_string(it));
        // Net change of v; the smoothed force itself stays nonzero at the
        // regularised fixed point.
        double umax = 0.0;
        for (std::size_t q = 0; q < next.size(); ++q)
            umax = std::max(umax, (next[q] - v[q]).norm());
        v = std::move(next);
        result.trace.push_back({it, f.mean_phase_error, umax});
        spdlog::debug("pvira iter {} err {:.6f} max_update {:.6f}", it, f.mean_phase_error, umax);
        if (umax < stop)
            break;
    }

    result.forward = exp_velocity(v);
    VectorVolume neg = v;
    for (auto& x : neg.values())
        x = -x;
    result.inverse = exp_velocity(neg);
    result.velocity = std::move(v);
    return result;
}

double inverse_consistency_error(const VectorVolume& forward, const VectorVolume& inverse, int margin)
{
    const VectorVolume c = compose_displacements(forward, inverse);
    const Grid3& g = c.grid();
    double worst = 0.0;
    for (int k = 0; k < g.dim(2); ++k)
        for (int j = 0; j < g.dim(1); ++j)
            for (int i = 0; i < g.dim(0); ++i)
                if (g.interior(i, j, k, margin))
                    worst = std::max(worst, c.at(i, j, k).norm());
    return worst;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRecord>& trace)
{
    std::ofstream f(path, std::ios::trunc);
    if (!f)
        fail(ErrorKind::io, "cannot write trace: " + path.string());
    f << "iteration,mean_phase_err,max_update\n";
    char line[128];
    for (const auto& r : trace) {
        std::snprintf(line, sizeof line, "%d,%.9g,%.9g\n", r.iteration, r.mean_phase_error, r.max_update_mm);
        f << line;
    }
    if (!f)
        fail(ErrorKind::io, "write failed: " + path.string());
}

} // namespace tagflow

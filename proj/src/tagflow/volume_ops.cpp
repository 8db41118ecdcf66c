#include "tagflow/volume_ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tagflow/error.hpp"

namespace tagflow {

double wrap(double theta)
{
    double r = theta - kTwoPi * std::round(theta / kTwoPi);
    if (r >= kPi)
        r -= kTwoPi;
    else if (r < -kPi)
        r += kTwoPi;
    return r;
}

namespace {

struct Stencil {
    std::size_t base = 0;
    std::size_t dx = 0;
    std::size_t dy = 0;
    std::size_t dz = 0;
    double tx = 0.0;
    double ty = 0.0;
    double tz = 0.0;
};

// On the last lattice plane the stencil collapses onto that plane (t = 0,
// step 0), so lattice points reproduce their own sample exactly.
inline void locate(double c, int n, int& i0, double& t, std::size_t& step)
{
    c = std::clamp(c, 0.0, static_cast<double>(n - 1));  // >= 0, so truncation is floor
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

inline Stencil stencil_at_index(const Grid3& g, const Vec3& c)
{
    int i0 = 0, j0 = 0, k0 = 0;
    std::size_t sx = 0, sy = 0, sz = 0;
    Stencil s;
    locate(c.x, g.dim(0), i0, s.tx, sx);
    locate(c.y, g.dim(1), j0, s.ty, sy);
    locate(c.z, g.dim(2), k0, s.tz, sz);
    s.base = g.index(i0, j0, k0);
    s.dx = sx;
    s.dy = sy * static_cast<std::size_t>(g.dim(0));
    s.dz = sz * static_cast<std::size_t>(g.dim(0)) * static_cast<std::size_t>(g.dim(1));
    return s;
}

inline Stencil make_stencil(const Grid3& g, const Vec3& p) { return stencil_at_index(g, g.continuous_index(p)); }

// Continuous index of voxel (i,j,k) displaced by d (mm).
inline Vec3 displaced_index(const Vec3& inv_h, int i, int j, int k, const Vec3& d)
{
    return {i + d.x * inv_h.x, j + d.y * inv_h.y, k + d.z * inv_h.z};
}

inline Vec3 inverse_spacing(const Grid3& g)
{
    return {1.0 / g.spacing().x, 1.0 / g.spacing().y, 1.0 / g.spacing().z};
}

template <class T, class Get>
inline T interpolate(const Stencil& s, Get get)
{
    const std::size_t b = s.base;
    const T c00 = get(b) * (1.0 - s.tx) + get(b + s.dx) * s.tx;
    const T c10 = get(b + s.dy) * (1.0 - s.tx) + get(b + s.dy + s.dx) * s.tx;
    const T c01 = get(b + s.dz) * (1.0 - s.tx) + get(b + s.dz + s.dx) * s.tx;
    const T c11 = get(b + s.dz + s.dy) * (1.0 - s.tx) + get(b + s.dz + s.dy + s.dx) * s.tx;
    const T c0 = c00 * (1.0 - s.ty) + c10 * s.ty;
    const T c1 = c01 * (1.0 - s.ty) + c11 * s.ty;
    return c0 * (1.0 - s.tz) + c1 * s.tz;
}

// Full symmetric kernel of 2r+1 taps, unnormalised.
std::vector<double> gaussian_taps(double sigma_vox)
{
    const int radius = static_cast<int>(std::ceil(3.0 * sigma_vox));
    std::vector<double> w(2 * static_cast<std::size_t>(radius) + 1);
    for (int j = -radius; j <= radius; ++j)
        w[static_cast<std::size_t>(j + radius)] = std::exp(-0.5 * j * j / (sigma_vox * sigma_vox));
    return w;
}

// In-place 1D Gaussian along one axis of an x-fastest array of T. The y and
// z passes sweep whole x rows so the inner loop stays contiguous.
template <class T>
void smooth_axis(std::span<T> data, const Grid3& g, int axis, double sigma_vox)
{
    if (!(sigma_vox > 0.0))
        return;
    const std::vector<double> taps = gaussian_taps(sigma_vox);
    const int radius = static_cast<int>(taps.size() / 2);
    if (radius == 0)
        return;
    const int n = g.dim(axis);
    std::vector<double> inv_norm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = std::max(-radius, -i); j <= std::min(radius, n - 1 - i); ++j)
            s += taps[static_cast<std::size_t>(j + radius)];
        inv_norm[static_cast<std::size_t>(i)] = 1.0 / s;
    }
    const double* w = taps.data() + radius;
    const std::size_t nx = static_cast<std::size_t>(g.dim(0));
    const std::size_t ny = static_cast<std::size_t>(g.dim(1));
    const std::size_t nz = static_cast<std::size_t>(g.dim(2));

    if (axis == 0) {
        std::vector<T> line(nx);
        for (std::size_t r = 0; r < ny * nz; ++r) {
            T* row = data.data() + r * nx;
            std::copy(row, row + nx, line.begin());
            for (int i = 0; i < n; ++i) {
                T acc{};
                const T* src = line.data() + i;
                for (int j = std::max(-radius, -i); j <= std::min(radius, n - 1 - i); ++j)
                    acc += src[j] * w[j];
                row[i] = acc * inv_norm[static_cast<std::size_t>(i)];
            }
        }
        return;
    }

    // Rows along the smoothing axis are `stride` apart; `blocks` independent
    // slabs of `n * stride` elements each.
    const std::size_t stride = axis == 1 ? nx : nx * ny;
    const std::size_t blocks = axis == 1 ? nz : 1;
    std::vector<T> slab(static_cast<std::size_t>(n) * stride);
    for (std::size_t b = 0; b < blocks; ++b) {
        T* base = data.data() + b * static_cast<std::size_t>(n) * stride;
        std::copy(base, base + slab.size(), slab.begin());
        for (int i = 0; i < n; ++i) {
            T* out = base + static_cast<std::size_t>(i) * stride;
            std::fill(out, out + stride, T{});
            for (int j = std::max(-radius, -i); j <= std::min(radius, n - 1 - i); ++j) {
                const T* src = slab.data() + static_cast<std::size_t>(i + j) * stride;
                const double wj = w[j];
                for (std::size_t x = 0; x < stride; ++x)
                    out[x] += src[x] * wj;
            }
            const double inv = inv_norm[static_cast<std::size_t>(i)];
            for (std::size_t x = 0; x < stride; ++x)
                out[x] *= inv;
        }
    }
}

void check_sigma(const Vec3& sigma_mm)
{
    for (int a = 0; a < 3; ++a)
        if (sigma_mm[a] < 0.0 || !std::isfinite(sigma_mm[a]))
            fail(ErrorKind::invalid_argument, "smoothing sigma must be finite and >= 0");
}

// Shared finite-difference stencil: central inside, one-sided on faces.
template <class Diff>
inline double partial(const Grid3& g, int axis, int i, int j, int k, Diff diff)
{
    int idx[3] = {i, j, k};
    const int n = g.dim(axis);
    const double h = g.spacing()[axis];
    const int c = idx[axis];
    int lo = c - 1, hi = c + 1;
    double span = 2.0 * h;
    if (c == 0) {
        lo = 0;
        span = h;
    } else if (c == n - 1) {
        hi = n - 1;
        span = h;
    }
    idx[axis] = lo;
    const std::size_t a = g.index(idx[0], idx[1], idx[2]);
    idx[axis] = hi;
    const std::size_t b = g.index(idx[0], idx[1], idx[2]);
    return diff(a, b) / span;
}

} // namespace

double trilinear_sample(const ScalarVolume& v, const Vec3& p)
{
    const Stencil s = make_stencil(v.grid(), p);
    return interpolate<double>(s, [&](std::size_t n) { return v[n]; });
}

Vec3 trilinear_sample(const VectorVolume& v, const Vec3& p)
{
    const Stencil s = make_stencil(v.grid(), p);
    return interpolate<Vec3>(s, [&](std::size_t n) { return v[n]; });
}

ScalarVolume warp_scalar(const ScalarVolume& image, const VectorVolume& disp)
{
    require_same_grid(image.grid(), disp.grid());
    require_kind(disp, FieldKind::displacement, "warp_scalar");
    const Grid3& g = image.grid();
    const Vec3 inv_h = inverse_spacing(g);
    ScalarVolume out(g);
    for (int k = 0; k < g.dim(2); ++k)
        for (int j = 0; j < g.dim(1); ++j)
            for (int i = 0; i < g.dim(0); ++i) {
                const std::size_t n = g.index(i, j, k);
                const Stencil st = stencil_at_index(g, displaced_index(inv_h, i, j, k, disp[n]));
                out[n] = interpolate<double>(st, [&](std::size_t m) { return image[m]; });
            }
    return out;
}

ScalarVolume warp_phase(const ScalarVolume& phase, const VectorVolume& disp)
{
    require_same_grid(phase.grid(), disp.grid());
    require_kind(disp, FieldKind::displacement, "warp_phase");
    const Grid3& g = phase.grid();
    const Vec3 inv_h = inverse_spacing(g);
    ScalarVolume out(g);
    for (int k = 0; k < g.dim(2); ++k)
        for (int j = 0; j < g.dim(1); ++j)
            for (int i = 0; i < g.dim(0); ++i) {
                const std::size_t n = g.index(i, j, k);
                const Stencil st = stencil_at_index(g, displaced_index(inv_h, i, j, k, disp[n]));
                const double base = phase[st.base];
                const double offset =
                    interpolate<double>(st, [&](std::size_t m) { return wrap(phase[m] - base); });
                out[n] = wrap(base + offset);
            }
    return out;
}

ScalarVolume gaussian_smooth(const ScalarVolume& v, const Vec3& sigma_mm)
{
    check_sigma(sigma_mm);
    ScalarVolume out = v;
    for (int a = 0; a < 3; ++a)
        smooth_axis<double>(out.values(), v.grid(), a, sigma_mm[a] / v.grid().spacing()[a]);
    return out;
}

VectorVolume gaussian_smooth(const VectorVolume& v, const Vec3& sigma_mm)
{
    check_sigma(sigma_mm);
    VectorVolume out = v;
    for (int a = 0; a < 3; ++a)
        smooth_axis<Vec3>(out.values(), v.grid(), a, sigma_mm[a] / v.grid().spacing()[a]);
    return out;
}

VectorVolume gradient_central(const ScalarVolume& v)
{
    const Grid3& g = v.grid();
    VectorVolume out(g, FieldKind::displacement);
    auto diff = [&](std::size_t a, std::size_t b) { return v[b] - v[a]; };
    for (int k = 0; k < g.dim(2); ++k)
        for (int j = 0; j < g.dim(1); ++j)
            for (int i = 0; i < g.dim(0); ++i) {
                Vec3& o = out.at(i, j, k);
                for (int a = 0; a < 3; ++a)
                    o[a] = partial(g, a, i, j, k, diff);
            }
    return out;
}

VectorVolume wrapped_gradient(const ScalarVolume& phase)
{
    const Grid3& g = phase.grid();
    std::vector<double> shifted(g.size());
    for (std::size_t n = 0; n < g.size(); ++n) {
        const double p = phase[n];
        shifted[n] = (p >= -kPi && p < kPi) ? (p < 0.0 ? p + kPi : p - kPi) : wrap(p + kPi);
    }
    VectorVolume out(g, FieldKind::displacement);
    const std::size_t stride[3] = {1, static_cast<std::size_t>(g.dim(0)),
                                   static_cast<std::size_t>(g.dim(0)) * static_cast<std::size_t>(g.dim(1))};
    for (int k = 0; k < g.dim(2); ++k)
        for (int j = 0; j < g.dim(1); ++j)
            for (int i = 0; i < g.dim(0); ++i) {
                const int idx[3] = {i, j, k};
                const std::size_t c = g.index(i, j, k);
                Vec3& o = out[c];
                for (int a = 0; a < 3; ++a) {
                    const int n = g.dim(a);
                    const int p = idx[a];
                    const std::size_t lo = p == 0 ? c : c - stride[a];
                    const std::size_t hi = p == n - 1 ? c : c + stride[a];
                    const double span = (p == 0 || p == n - 1) ? g.spacing()[a] : 2.0 * g.spacing()[a];
                    const double raw = phase[hi] - phase[lo];
                    const double alt = shifted[hi] - shifted[lo];
                    o[a] = (std::abs(alt) < std::abs(raw) ? alt : raw) / span;
                }
            }
    return out;
}

ScalarVolume divergence(const VectorVolume& v)
{
    const Grid3& g = v.grid();
    ScalarVolume out(g);
    for (int k = 0; k < g.dim(2); ++k)
        for (int j = 0; j < g.dim(1); ++j)
            for (int i = 0; i < g.dim(0); ++i) {
                double d = 0.0;
                for (int a = 0; a < 3; ++a)
                    d += partial(g, a, i, j, k, [&](std::size_t lo, std::size_t hi) { return v[hi][a] - v[lo][a]; });
                out.at(i, j, k) = d;
            }
    return out;
}

ScalarVolume jacobian_determinant(const VectorVolume& disp)
{
    require_kind(disp, FieldKind::displacement, "jacobian_determinant");
    const Grid3& g = disp.grid();
    ScalarVolume out(g);
    for (int k = 0; k < g.dim(2); ++k)
        for (int j = 0; j < g.dim(1); ++j)
            for (int i = 0; i < g.dim(0); ++i) {
                double m[3][3];
                for (int r = 0; r < 3; ++r)
                    for (int a = 0; a < 3; ++a)
                        m[r][a] = (r == a ? 1.0 : 0.0) +
                                  partial(g, a, i, j, k,
                                          [&](std::size_t lo, std::size_t hi) { return disp[hi][r] - disp[lo][r]; });
                out.at(i, j, k) = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                                  m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                                  m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            }
    return out;
}

VectorVolume compose_displacements(const VectorVolume& outer, const VectorVolume& inner)
{
    require_same_grid(outer.grid(), inner.grid());
    require_kind(outer, FieldKind::displacement, "compose_displacements");
    require_kind(inner, FieldKind::displacement, "compose_displacements");
    const Grid3& g = inner.grid();
    const Vec3 inv_h = inverse_spacing(g);
    VectorVolume out(g, FieldKind::displacement);
    for (int k = 0; k < g.dim(2); ++k)
        for (int j = 0; j < g.dim(1); ++j)
            for (int i = 0; i < g.dim(0); ++i) {
                const std::size_t n = g.index(i, j, k);
                const Stencil st = stencil_at_index(g, displaced_index(inv_h, i, j, k, inner[n]));
                out[n] = inner[n] + interpolate<Vec3>(st, [&](std::size_t m) { return outer[m]; });
            }
    return out;
}

} // namespace tagflow

#include "tagflow/fft.hpp"

#include <map>
#include <mutex>
#include <new>
#include <numbers>
#include <tuple>

#include <fftw3.h>

#include "tagflow/error.hpp"

namespace tagflow {

namespace detail {

void* fft_alloc(std::size_t bytes)
{
    void* p = fftw_malloc(bytes);
    if (!p)
        throw std::bad_alloc();
    return p;
}

void fft_free(void* p) { fftw_free(p); }

} // namespace detail

namespace {

enum class PlanKind { forward, backward, r2c, c2r };

// fftw planning is not thread-safe; execution on new arrays is.
std::mutex plan_mutex;

std::size_t total(const std::array<int, 3>& dims)
{
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
}

fftw_plan cached_plan(const std::array<int, 3>& dims, PlanKind kind)
{
    static std::map<std::tuple<int, int, int, int>, fftw_plan> plans;
    std::lock_guard lock(plan_mutex);
    const auto key = std::make_tuple(dims[0], dims[1], dims[2], static_cast<int>(kind));
    if (auto it = plans.find(key); it != plans.end())
        return it->second;
    ComplexBuffer cbuf(half_spectrum_size(dims) > total(dims) ? half_spectrum_size(dims) : total(dims));
    RealBuffer rbuf(total(dims));
    auto* c = reinterpret_cast<fftw_complex*>(cbuf.data());
    // Slowest axis first for FFTW's row-major convention.
    fftw_plan plan = nullptr;
    switch (kind) {
    case PlanKind::forward:
        plan = fftw_plan_dft_3d(dims[2], dims[1], dims[0], c, c, FFTW_FORWARD, FFTW_ESTIMATE);
        break;
    case PlanKind::backward:
        plan = fftw_plan_dft_3d(dims[2], dims[1], dims[0], c, c, FFTW_BACKWARD, FFTW_ESTIMATE);
        break;
    case PlanKind::r2c:
        plan = fftw_plan_dft_r2c_3d(dims[2], dims[1], dims[0], rbuf.data(), c, FFTW_ESTIMATE);
        break;
    case PlanKind::c2r:
        plan = fftw_plan_dft_c2r_3d(dims[2], dims[1], dims[0], c, rbuf.data(), FFTW_ESTIMATE);
        break;
    }
    if (!plan)
        fail(ErrorKind::numerical, "failed to create FFT plan");
    plans.emplace(key, plan);
    return plan;
}

void run_inplace(ComplexBuffer& buf, const std::array<int, 3>& dims, PlanKind kind)
{
    if (buf.size() != total(dims))
        fail(ErrorKind::invalid_argument, "FFT buffer size does not match dims");
    auto* p = reinterpret_cast<fftw_complex*>(buf.data());
    fftw_execute_dft(cached_plan(dims, kind), p, p);
}

} // namespace

void fft3_forward(ComplexBuffer& buf, const std::array<int, 3>& dims) { run_inplace(buf, dims, PlanKind::forward); }

void fft3_inverse(ComplexBuffer& buf, const std::array<int, 3>& dims)
{
    run_inplace(buf, dims, PlanKind::backward);
    const double scale = 1.0 / static_cast<double>(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i)
        buf[i] *= scale;
}

std::size_t half_spectrum_size(const std::array<int, 3>& dims)
{
    return static_cast<std::size_t>(dims[0] / 2 + 1) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
}

void fft3_r2c(const RealBuffer& in, ComplexBuffer& out, const std::array<int, 3>& dims)
{
    if (in.size() != total(dims) || out.size() != half_spectrum_size(dims))
        fail(ErrorKind::invalid_argument, "FFT buffer size does not match dims");
    // r2c does not modify its input.
    fftw_execute_dft_r2c(cached_plan(dims, PlanKind::r2c), const_cast<double*>(in.data()),
                         reinterpret_cast<fftw_complex*>(out.data()));
}

void fft3_c2r(ComplexBuffer& in, RealBuffer& out, const std::array<int, 3>& dims)
{
    if (out.size() != total(dims) || in.size() != half_spectrum_size(dims))
        fail(ErrorKind::invalid_argument, "FFT buffer size does not match dims");
    fftw_execute_dft_c2r(cached_plan(dims, PlanKind::c2r), reinterpret_cast<fftw_complex*>(in.data()), out.data());
    const double scale = 1.0 / static_cast<double>(out.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] *= scale;
}

double bin_frequency(int b, int n, double h)
{
    const int signed_bin = (2 * b < n) ? b : b - n;
    return 2.0 * std::numbers::pi * signed_bin / (n * h);
}

} // namespace tagflow

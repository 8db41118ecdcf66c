#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <memory>

namespace tagflow {

namespace detail {
void* fft_alloc(std::size_t bytes);
void fft_free(void* p);
} // namespace detail

// SIMD-aligned buffer for FFTW. Allocation alignment is fixed so cached
// plans execute identically on every buffer.
template <class T>
class AlignedBuffer {
public:
    explicit AlignedBuffer(std::size_t n) : n_(n), data_(static_cast<T*>(detail::fft_alloc(sizeof(T) * (n ? n : 1))))
    {
        for (std::size_t i = 0; i < n_; ++i)
            data_[i] = T{};
    }
    std::size_t size() const { return n_; }
    T* data() { return data_.get(); }
    const T* data() const { return data_.get(); }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

private:
    struct Free {
        void operator()(T* p) const { detail::fft_free(p); }
    };
    std::size_t n_;
    std::unique_ptr<T[], Free> data_;
};

using ComplexBuffer = AlignedBuffer<std::complex<double>>;
using RealBuffer = AlignedBuffer<double>;

// In-place 3D DFT over an x-fastest lattice. forward() uses exp(-i...);
// inverse() includes the 1/N normalisation.
void fft3_forward(ComplexBuffer& buf, const std::array<int, 3>& dims);
void fft3_inverse(ComplexBuffer& buf, const std::array<int, 3>& dims);

// Real-input transforms. The half spectrum keeps x bins 0..nx/2 and is
// stored x-fastest with row length nx/2 + 1.
std::size_t half_spectrum_size(const std::array<int, 3>& dims);
void fft3_r2c(const RealBuffer& in, ComplexBuffer& out, const std::array<int, 3>& dims);
// Normalised inverse; `in` is overwritten.
void fft3_c2r(ComplexBuffer& in, RealBuffer& out, const std::array<int, 3>& dims);

// Angular frequency (rad/mm) of DFT bin b on an axis of n samples at
// spacing h: bins above n/2 wrap to negative frequencies.
double bin_frequency(int b, int n, double h);

} // namespace tagflow

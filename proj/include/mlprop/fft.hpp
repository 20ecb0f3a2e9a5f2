#ifndef MLPROP_FFT_HPP
#define MLPROP_FFT_HPP

#include <complex>
#include <vector>

#include <fftw3.h>

#include "mlprop/grid.hpp"

namespace mlprop {

using cplx = std::complex<double>;

// In-place complex DFT, unnormalized forward, 1/N on the inverse.
inline void dft_1d(std::vector<cplx>& data, bool inverse) {
    const int n = static_cast<int>(data.size());
    fftw_plan plan = fftw_plan_dft_1d(
        n, reinterpret_cast<fftw_complex*>(data.data()),
        reinterpret_cast<fftw_complex*>(data.data()),
        inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    if (inverse) {
        const double scale = 1.0 / static_cast<double>(n);
        for (cplx& c : data) c *= scale;
    }
}

// DFT along a single axis of a row-major n-D complex array.
inline void dft_axis(std::vector<cplx>& data, std::span<const index_t> shape,
                     index_t axis, bool inverse) {
    index_t stride = 1;
    for (index_t a = shape.size(); a-- > axis + 1;) stride *= shape[a];
    const index_t len = shape[axis];
    const index_t block = stride * len;
    const index_t outer = data.size() / block;

    const int n = static_cast<int>(len);
    std::vector<cplx> line(len);
    fftw_plan plan = fftw_plan_dft_1d(
        n, reinterpret_cast<fftw_complex*>(line.data()),
        reinterpret_cast<fftw_complex*>(line.data()),
        inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
    for (index_t o = 0; o < outer; ++o) {
        for (index_t s = 0; s < stride; ++s) {
            const index_t base = o * block + s;
            for (index_t i = 0; i < len; ++i) line[i] = data[base + i * stride];
            fftw_execute(plan);
            if (inverse) {
                const double scale = 1.0 / static_cast<double>(len);
                for (cplx& c : line) c *= scale;
            }
            for (index_t i = 0; i < len; ++i) data[base + i * stride] = line[i];
        }
    }
    fftw_destroy_plan(plan);
}

// Full n-D DFT of a row-major complex array.
inline void dft_nd(std::vector<cplx>& data, std::span<const index_t> shape,
                   bool inverse) {
    for (index_t a = 0; a < shape.size(); ++a) dft_axis(data, shape, a, inverse);
}

// Signed integer frequency of DFT bin k for length n (k in [0,n)).
inline long signed_bin(index_t k, index_t n) {
    return k <= n / 2 ? static_cast<long>(k)
                      : static_cast<long>(k) - static_cast<long>(n);
}

} // namespace mlprop

#endif

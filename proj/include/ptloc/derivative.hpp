#ifndef PTLOC_DERIVATIVE_HPP
#define PTLOC_DERIVATIVE_HPP

#include "ptloc/fft.hpp"
#include "ptloc/momentum_state.hpp"

namespace ptloc {

enum class DerivativeScheme {
    /// 8th-order central differences, amplitude taken as zero outside the grid.
    central8,
    /// FFT multiplication by i k along the axis.
    spectral,
};

inline const char* to_string(DerivativeScheme s) {
    return s == DerivativeScheme::central8 ? "central8" : "spectral";
}

/// d/dq_axis of a row-major grid function.
inline std::vector<complex> axis_derivative(const Grid3& g, const std::vector<complex>& f, int axis,
                                            DerivativeScheme scheme) {
    const auto n = g.counts();
    const double h = g.axes[axis].step;
    std::size_t stride = 1;
    for (int a = axis + 1; a < 3; ++a) stride *= n[a];
    if (scheme == DerivativeScheme::spectral) {
        std::vector<complex> d = f;
        fft::transform_axis(d, n, axis, fft::Direction::forward);
        const int len = n[axis];
        std::vector<complex> ik(len);
        for (int k = 0; k < len; ++k) {
            const int kk = (k <= len / 2) ? k : k - len;
            ik[k] = (2 * kk == len) ? 0.0 : complex(0.0, 2.0 * pi * kk / (len * h)) / double(len);
        }
        for (std::size_t idx = 0; idx < d.size(); ++idx) d[idx] *= ik[(idx / stride) % len];
        fft::transform_axis(d, n, axis, fft::Direction::backward);
        return d;
    }
    static constexpr std::array<double, 4> c = {4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0};
    std::vector<complex> d(f.size());
    const int len = n[axis];
    parallel_for(f.size(), [&](std::size_t idx) {
        const int i = static_cast<int>((idx / stride) % len);
        complex acc = 0.0;
        for (int s = 1; s <= 4; ++s) {
            const complex fp = (i + s < len) ? f[idx + s * stride] : complex(0.0);
            const complex fm = (i - s >= 0) ? f[idx - s * stride] : complex(0.0);
            acc += c[s - 1] * (fp - fm);
        }
        d[idx] = acc / h;
    });
    return d;
}

}  // namespace ptloc

#endif

#ifndef PTLOC_FFT_HPP
#define PTLOC_FFT_HPP

// Thin RAII layer over FFTW3. Plans use FFTW_ESTIMATE so results do not depend on timing.

#include <fftw3.h>

#include <memory>
#include <mutex>
#include <vector>

#include "ptloc/core.hpp"

namespace ptloc::fft {

inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(p);
    }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

inline fftw_complex* as_fftw(complex* p) { return reinterpret_cast<fftw_complex*>(p); }

enum class Direction : int { forward = FFTW_FORWARD, backward = FFTW_BACKWARD };

/// In-place unnormalized 3D transform of a row-major n0 x n1 x n2 array.
inline void transform3(std::vector<complex>& data, int n0, int n1, int n2, Direction dir) {
    require(data.size() == static_cast<std::size_t>(n0) * n1 * n2, ErrorKind::invalid_input,
            "fft size mismatch");
    Plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan.reset(fftw_plan_dft_3d(n0, n1, n2, as_fftw(data.data()), as_fftw(data.data()),
                                    static_cast<int>(dir), FFTW_ESTIMATE));
    }
    fftw_execute(plan.get());
}

/// In-place unnormalized 1D transforms along one axis of a row-major 3D array.
inline void transform_axis(std::vector<complex>& data, std::array<int, 3> n, int axis,
                           Direction dir) {
    int stride = 1;
    for (int a = axis + 1; a < 3; ++a) stride *= n[a];
    const int len = n[axis];
    int outer = 1;
    for (int a = 0; a < axis; ++a) outer *= n[a];
    Plan plan;
    {
        std::lock_guard lock(planner_mutex());
        // One plan covers the `stride` interleaved transforms of a single outer block.
        plan.reset(fftw_plan_many_dft(1, &len, stride, as_fftw(data.data()), nullptr, stride, 1,
                                      as_fftw(data.data()), nullptr, stride, 1,
                                      static_cast<int>(dir), FFTW_ESTIMATE));
    }
    const std::size_t block = static_cast<std::size_t>(len) * stride;
    for (int o = 0; o < outer; ++o) {
        fftw_complex* p = as_fftw(data.data() + o * block);
        fftw_execute_dft(plan.get(), p, p);
    }
}

/// DST-I: y_k = 2 sum_{n=0}^{N-1} x_n sin(pi (n+1)(k+1)/(N+1)). Applying it twice scales by 2(N+1).
inline std::vector<double> dst1(std::vector<double> x) {
    const int n = static_cast<int>(x.size());
    std::vector<double> y(x.size());
    Plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan.reset(fftw_plan_r2r_1d(n, x.data(), y.data(), FFTW_RODFT00, FFTW_ESTIMATE));
    }
    fftw_execute(plan.get());
    return y;
}

}  // namespace ptloc::fft

#endif

#ifndef PTLOC_CORE_HPP
#define PTLOC_CORE_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ptloc {

using complex = std::complex<double>;
using namespace std::complex_literals;

inline constexpr double pi = std::numbers::pi;

/// Four-vector with contravariant components (x^0, x^1, x^2, x^3).
using Vec4 = std::array<double, 4>;
/// Spatial momentum (pi^1, pi^2, pi^3).
using Vec3 = std::array<double, 3>;

/// Minkowski product with signature (-,+,+,+).
inline double minkowski(const Vec4& a, const Vec4& b) {
    return -a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
}

inline Vec4 lower(const Vec4& a) { return {-a[0], a[1], a[2], a[3]}; }

inline double norm2(const Vec3& p) { return p[0] * p[0] + p[1] * p[1] + p[2] * p[2]; }

inline double energy(const Vec3& p, double mass) { return std::sqrt(norm2(p) + mass * mass); }

/// Energy sign of the subspace a state or operator lives in.
enum class EnergySign : int { positive = 1, negative = -1 };

inline double sign_value(EnergySign xi) { return static_cast<double>(static_cast<int>(xi)); }

inline const char* to_string(EnergySign xi) { return xi == EnergySign::positive ? "+" : "-"; }

enum class ErrorKind {
    invalid_input,
    numerical_domain,
    surface_miss,
    degenerate_surface,
    degenerate_observer,
    incompatible_state,
    resolution,
    pole,
    invalid_order,
    range,
    truncation,
    singular_domain,
    invalid_chart,
    invalid_composition,
    completeness_failure,
    map_validation,
    localization_failure,
    config,
    io,
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::invalid_input: return "invalid-input";
        case ErrorKind::numerical_domain: return "numerical-domain";
        case ErrorKind::surface_miss: return "surface-miss";
        case ErrorKind::degenerate_surface: return "degenerate-surface";
        case ErrorKind::degenerate_observer: return "degenerate-observer";
        case ErrorKind::incompatible_state: return "incompatible-state";
        case ErrorKind::resolution: return "resolution";
        case ErrorKind::pole: return "pole";
        case ErrorKind::invalid_order: return "invalid-order";
        case ErrorKind::range: return "range";
        case ErrorKind::truncation: return "truncation";
        case ErrorKind::singular_domain: return "singular-domain";
        case ErrorKind::invalid_chart: return "invalid-chart";
        case ErrorKind::invalid_composition: return "invalid-composition";
        case ErrorKind::completeness_failure: return "completeness-failure";
        case ErrorKind::map_validation: return "map-validation";
        case ErrorKind::localization_failure: return "localization-failure";
        case ErrorKind::config: return "config";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const char* what) {
    if (!cond) fail(kind, what);
}

/// Pairwise summation; the reduction order depends only on the length, so results are reproducible.
template <class T>
T pairwise_sum(std::span<const T> v) {
    if (v.size() <= 16) {
        T acc{};
        for (const auto& x : v) acc += x;
        return acc;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

template <class T>
T pairwise_sum(const std::vector<T>& v) {
    return pairwise_sum(std::span<const T>(v.data(), v.size()));
}

/// Process-wide worker count used by parallel_for. Set once by the CLI.
inline std::atomic<int>& thread_count() {
    static std::atomic<int> n{1};
    return n;
}

/// Splits [0, n) into contiguous slabs, one per worker. Each index is visited exactly once and
/// writes must go to disjoint outputs.
template <class F>
void parallel_for(std::size_t n, F&& body) {
    const std::size_t workers = std::min<std::size_t>(std::max(1, thread_count().load()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
}

}  // namespace ptloc

#endif

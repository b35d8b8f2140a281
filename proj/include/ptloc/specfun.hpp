#ifndef PTLOC_SPECFUN_HPP
#define PTLOC_SPECFUN_HPP

// Special functions for the POVM kernels: complex log-gamma, spherical harmonics, conical
// (Mehler) Legendre functions and Gauss-Legendre rules.

#include <utility>
#include <vector>

#include "ptloc/core.hpp"

namespace ptloc::specfun {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline QuadratureRule gauss_legendre(int n) {
    require(n >= 1, ErrorKind::invalid_input, "quadrature order must be positive");
    QuadratureRule q;
    q.nodes.resize(n);
    q.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        q.nodes[i] = -x;
        q.nodes[n - 1 - i] = x;
        q.weights[i] = w;
        q.weights[n - 1 - i] = w;
    }
    if (n == 1) {
        q.nodes[0] = 0.0;
        q.weights[0] = 2.0;
    }
    return q;
}

namespace detail {

// Lanczos approximation, g = 7, 9 terms.
inline constexpr double lanczos_g = 7.0;
inline constexpr std::array<double, 9> lanczos_coef = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};

inline complex log_gamma_lanczos(complex z) {
    z -= 1.0;
    complex x = lanczos_coef[0];
    for (int i = 1; i < 9; ++i) x += lanczos_coef[i] / (z + static_cast<double>(i));
    const complex t = z + lanczos_g + 0.5;
    return 0.5 * std::log(2.0 * pi) + (z + 0.5) * std::log(t) - t + std::log(x);
}

}  // namespace detail

/// log Gamma(z) on the branch continuous off the negative real axis, so that
/// log_gamma(z + 1) = log_gamma(z) + log(z).
inline complex log_gamma(complex z) {
    if (z.imag() == 0.0 && z.real() <= 0.0 && z.real() == std::floor(z.real()))
        fail(ErrorKind::pole, "log_gamma at non-positive integer");
    if (z.real() >= 0.5) return detail::log_gamma_lanczos(z);
    const int n = static_cast<int>(std::ceil(0.5 - z.real()));
    complex acc = 0.0;
    for (int k = 0; k < n; ++k) acc += std::log(z + static_cast<double>(k));
    return detail::log_gamma_lanczos(z + static_cast<double>(n)) - acc;
}

inline int lm_index(int l, int m) { return l * l + l + m; }
inline int lm_count(int lmax) { return (lmax + 1) * (lmax + 1); }

/// All orthonormal Y^{l,m}(theta, phi) for l <= lmax, indexed by lm_index. Condon-Shortley phase.
inline std::vector<complex> spherical_harmonics(int lmax, double theta, double phi) {
    require(lmax >= 0, ErrorKind::invalid_order, "lmax must be non-negative");
    std::vector<complex> y(lm_count(lmax));
    const double x = std::cos(theta);
    const double s = std::sin(theta);
    double pmm = std::sqrt(1.0 / (4.0 * pi));
    for (int m = 0; m <= lmax; ++m) {
        if (m > 0) pmm *= -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;
        const complex phase = std::polar(1.0, m * phi);
        double p_lm2 = 0.0;
        double p_lm1 = pmm;
        for (int l = m; l <= lmax; ++l) {
            double p;
            if (l == m) {
                p = pmm;
            } else if (l == m + 1) {
                p = x * std::sqrt(2.0 * m + 3.0) * pmm;
            } else {
                const double a = std::sqrt((4.0 * l * l - 1.0) / (double(l) * l - double(m) * m));
                const double b = std::sqrt((double(l - 1) * (l - 1) - double(m) * m) /
                                           (4.0 * (l - 1) * (l - 1) - 1.0));
                p = a * (x * p_lm1 - b * p_lm2);
            }
            if (l > m) {
                p_lm2 = p_lm1;
                p_lm1 = p;
            }
            y[lm_index(l, m)] = p * phase;
            if (m > 0) y[lm_index(l, -m)] = ((m % 2) ? -1.0 : 1.0) * std::conj(p * phase);
        }
    }
    return y;
}

inline complex spherical_harmonic(int l, int m, double theta, double phi) {
    require(l >= 0, ErrorKind::invalid_order, "negative degree");
    if (std::abs(m) > l) fail(ErrorKind::invalid_order, "|m| > l");
    require(theta >= 0.0 && theta <= pi, ErrorKind::invalid_input, "theta outside [0, pi]");
    return spherical_harmonics(l, theta, phi)[lm_index(l, m)];
}

/// Order -mu and degree -1/2 + i Lambda of a conical function.
struct ConicalOrder {
    int mu = 0;
    double lambda = 0.0;
};

inline void check_conical(const ConicalOrder& o, double x) {
    require(o.mu >= 0, ErrorKind::invalid_order, "conical order must be non-negative");
    require(o.lambda >= 0.0 && std::isfinite(o.lambda), ErrorKind::invalid_order,
            "conical degree parameter must be finite and non-negative");
    require(x >= 1.0, ErrorKind::invalid_input, "conical argument must be >= 1");
    if (x > 1e6) fail(ErrorKind::range, "conical argument above 1e6");
}

/// Hypergeometric series in (1 - x)/2.
inline double conical_p_series(const ConicalOrder& o, double x) {
    check_conical(o, x);
    const double w = 0.5 * (1.0 - x);
    const double lam2 = o.lambda * o.lambda;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 0; k < 2000; ++k) {
        const double kh = k + 0.5;
        term *= (kh * kh + lam2) / ((k + 1.0 + o.mu) * (k + 1.0)) * w;
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum) && k > 4) break;
    }
    const double pre = (o.mu == 0) ? 1.0 : std::pow((x - 1.0) / (x + 1.0), 0.5 * o.mu);
    return pre * sum / std::tgamma(1.0 + o.mu);
}

/// Quadrature of
///   sqrt(2/pi) sinh(a)^-mu / Gamma(mu + 1/2) int_0^a cos(Lambda t) (cosh a - cosh t)^(mu - 1/2) dt,
/// with x = cosh a and t = a (1 - s^2) removing the endpoint singularity.
inline double conical_p_integral(const ConicalOrder& o, double x) {
    check_conical(o, x);
    if (x == 1.0) return o.mu == 0 ? 1.0 : 0.0;
    const double a = std::acosh(x);
    const double e = o.mu - 0.5;
    const int panels = std::max(4, static_cast<int>(std::ceil((o.lambda * a + 4.0) / 2.0)));
    static const QuadratureRule rule = gauss_legendre(20);
    const double log_pre = 0.5 * std::log(2.0 / pi) - o.mu * std::log(std::sinh(a)) -
                           std::lgamma(o.mu + 0.5) + std::log(2.0 * a) + e * std::log(0.5 * a);
    std::vector<double> parts;
    parts.reserve(static_cast<std::size_t>(panels) * rule.nodes.size());
    for (int p = 0; p < panels; ++p) {
        const double lo = double(p) / panels;
        const double hi = double(p + 1) / panels;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * rule.nodes[i];
            const double t = a * (1.0 - s * s);
            const double y = 0.5 * a * s * s;
            const double shy = (y < 1e-8) ? 1.0 + y * y / 6.0 : std::sinh(y) / y;
            const double log_f = e * (std::log(shy) + std::log(2.0 * std::sinh(0.5 * (a + t))));
            const double smu = (o.mu == 0) ? 1.0 : std::pow(s, 2 * o.mu);
            parts.push_back(0.5 * (hi - lo) * rule.weights[i] * std::cos(o.lambda * t) * smu *
                            std::exp(log_f + log_pre));
        }
    }
    return pairwise_sum(parts);
}

/// P^{-mu}_{-1/2 + i Lambda}(x) for x >= 1. The series is used near x = 1 while its alternating
/// terms stay well conditioned; the integral representation elsewhere.
inline double conical_p(const ConicalOrder& o, double x) {
    check_conical(o, x);
    if (x < 1.5 && o.lambda * std::sqrt(2.0 * (x - 1.0)) < 3.0) return conical_p_series(o, x);
    return conical_p_integral(o, x);
}

}  // namespace ptloc::specfun

#endif

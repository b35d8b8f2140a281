#ifndef PTLOC_RADIAL_HPP
#define PTLOC_RADIAL_HPP

// Radial-harmonic decomposition psi(pi) = sum_lm psi_lm(r) Y^{l,m}(Omega) on a logarithmic
// radial grid. Feeds the time-POVM overlaps.

#include <functional>

#include "ptloc/momentum_state.hpp"
#include "ptloc/specfun.hpp"

namespace ptloc {

/// Nodes r_i = r_min exp(i du), i = 0..count-1, with trapezoid weights in u = ln r (dr = r du).
struct RadialGrid {
    double r_min = 1e-4;
    double r_max = 30.0;
    int count = 2048;
    double mass = 1.0;

    double du() const { return std::log(r_max / r_min) / (count - 1); }
    double r(int i) const { return i == count - 1 ? r_max : r_min * std::exp(i * du()); }
    double weight(int i) const { return r(i) * du() * ((i == 0 || i == count - 1) ? 0.5 : 1.0); }
    bool operator==(const RadialGrid&) const = default;
};

inline void check_radial_grid(const RadialGrid& g) {
    require(g.r_min > 0.0 && g.r_max > g.r_min, ErrorKind::invalid_input, "radial grid needs 0 < r_min < r_max");
    require(g.count >= 8, ErrorKind::invalid_input, "radial grid needs at least 8 nodes");
    require(g.mass > 0.0, ErrorKind::invalid_input, "mass must be positive");
}

/// Gauss-Legendre in cos(theta) times a uniform azimuthal rule.
struct AngularRule {
    std::vector<double> theta, weight;  // weight includes the azimuthal step
    int n_phi = 0;

    std::size_t size() const { return theta.size() * n_phi; }
    double phi(int k) const { return 2.0 * pi * k / n_phi; }
};

/// Exact for band-limited integrands of total degree <= 2 * order - 1.
inline AngularRule angular_rule(int order) {
    require(order >= 1, ErrorKind::invalid_input, "angular order must be positive");
    const auto gl = specfun::gauss_legendre(order);
    AngularRule a;
    a.n_phi = 2 * order;
    for (int i = 0; i < order; ++i) {
        a.theta.push_back(std::acos(gl.nodes[i]));
        a.weight.push_back(gl.weights[i] * 2.0 * pi / a.n_phi);
    }
    return a;
}

struct RadialState {
    RadialGrid grid;
    int l_max = 0;
    /// channels[lm_index(l, m)][i] = psi_lm(r_i).
    std::vector<std::vector<complex>> channels;
    EnergySign xi = EnergySign::positive;
    /// int dmu |psi|^2 of the decomposed function including angular content above l_max.
    double full_norm2 = 0.0;
    /// Norm fraction lost to the angular truncation or to the Cartesian interpolation.
    double reconstruction_error = 0.0;
};

/// sum_i w_i (m / E_i) r_i^2 |f_i|^2.
inline double radial_channel_norm2(const RadialGrid& g, const std::vector<complex>& f) {
    std::vector<double> t(f.size());
    for (int i = 0; i < g.count; ++i) {
        const double r = g.r(i);
        t[i] = g.weight(i) * g.mass / std::sqrt(r * r + g.mass * g.mass) * r * r * std::norm(f[i]);
    }
    return pairwise_sum(t);
}

/// Sum over the retained channels.
inline double norm2(const RadialState& s) {
    std::vector<double> t;
    for (const auto& c : s.channels) t.push_back(radial_channel_norm2(s.grid, c));
    return pairwise_sum(t);
}

inline double channel_norm2(const RadialState& s, int l, int m) {
    return radial_channel_norm2(s.grid, s.channels[specfun::lm_index(l, m)]);
}

/// Scales so the full (untruncated) norm is one.
inline RadialState normalized(RadialState s) {
    require(s.full_norm2 > 0.0 && std::isfinite(s.full_norm2), ErrorKind::numerical_domain,
            "radial state has zero or non-finite norm");
    const double c = 1.0 / std::sqrt(s.full_norm2);
    for (auto& ch : s.channels)
        for (auto& v : ch) v *= c;
    s.full_norm2 = 1.0;
    return s;
}

inline int default_angular_order(int l_max) { return l_max + 17; }

/// Projects f onto Y^{l,m} for l <= l_max at every radial node.
inline RadialState radial_from_function(const RadialGrid& g, int l_max, EnergySign xi,
                                        const std::function<complex(const Vec3&)>& f, int angular_order = 0,
                                        double max_error = 1.0) {
    check_radial_grid(g);
    require(l_max >= 0, ErrorKind::invalid_order, "l_max must be non-negative");
    const int order = angular_order > 0 ? angular_order : default_angular_order(l_max);
    require(order > l_max, ErrorKind::invalid_input, "angular quadrature too coarse for l_max");
    const AngularRule rule = angular_rule(order);
    const int nlm = specfun::lm_count(l_max);
    // conj(Y) * weight and unit vectors at every angular node.
    std::vector<std::vector<complex>> ybar(rule.size());
    std::vector<Vec3> dir(rule.size());
    std::vector<double> wang(rule.size());
    for (std::size_t a = 0; a < rule.theta.size(); ++a)
        for (int k = 0; k < rule.n_phi; ++k) {
            const std::size_t idx = a * rule.n_phi + k;
            const double th = rule.theta[a], ph = rule.phi(k);
            auto y = specfun::spherical_harmonics(l_max, th, ph);
            for (auto& v : y) v = std::conj(v) * rule.weight[a];
            ybar[idx] = std::move(y);
            dir[idx] = {std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
            wang[idx] = rule.weight[a];
        }
    RadialState s{g, l_max, std::vector<std::vector<complex>>(nlm, std::vector<complex>(g.count)), xi, 0.0, 0.0};
    std::vector<double> full(g.count);
    parallel_for(static_cast<std::size_t>(g.count), [&](std::size_t i) {
        const double r = g.r(static_cast<int>(i));
        std::vector<complex> acc(nlm, 0.0);
        double sq = 0.0;
        for (std::size_t idx = 0; idx < dir.size(); ++idx) {
            const complex v = f({r * dir[idx][0], r * dir[idx][1], r * dir[idx][2]});
            sq += wang[idx] * std::norm(v);
            for (int lm = 0; lm < nlm; ++lm) acc[lm] += ybar[idx][lm] * v;
        }
        for (int lm = 0; lm < nlm; ++lm) s.channels[lm][i] = acc[lm];
        full[i] = g.weight(static_cast<int>(i)) * g.mass / std::sqrt(r * r + g.mass * g.mass) * r * r * sq;
    });
    for (const auto& c : s.channels)
        for (const auto& v : c)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) fail(ErrorKind::numerical_domain, "non-finite channel");
    s.full_norm2 = pairwise_sum(full);
    const double kept = norm2(s);
    s.reconstruction_error = s.full_norm2 > 0.0 ? std::abs(s.full_norm2 - kept) / s.full_norm2 : 0.0;
    if (s.reconstruction_error > max_error)
        fail(ErrorKind::truncation, "angular truncation loses " + std::to_string(s.reconstruction_error) +
                                        " of the norm at l_max = " + std::to_string(l_max));
    return s;
}

namespace detail {

/// Tensor Lagrange interpolation of order 8 on a Cartesian grid; zero outside.
inline complex interpolate_grid(const MomentumState& psi, const Vec3& q) {
    const Grid3& g = psi.grid;
    constexpr int order = 8;
    std::array<int, 3> base{};
    std::array<std::array<double, order>, 3> w{};
    for (int a = 0; a < 3; ++a) {
        const double u = (q[a] - g.axes[a].origin) / g.axes[a].step;
        if (u < -1.0 || u > g.axes[a].count) return 0.0;
        base[a] = static_cast<int>(std::floor(u)) - order / 2 + 1;
        for (int i = 0; i < order; ++i) {
            double c = 1.0;
            for (int j = 0; j < order; ++j)
                if (j != i) c *= (u - (base[a] + j)) / double(i - j);
            w[a][i] = c;
        }
    }
    complex acc = 0.0;
    for (int i = 0; i < order; ++i) {
        const int ii = base[0] + i;
        if (ii < 0 || ii >= g.axes[0].count) continue;
        for (int j = 0; j < order; ++j) {
            const int jj = base[1] + j;
            if (jj < 0 || jj >= g.axes[1].count) continue;
            const double wij = w[0][i] * w[1][j];
            for (int k = 0; k < order; ++k) {
                const int kk = base[2] + k;
                if (kk < 0 || kk >= g.axes[2].count) continue;
                acc += wij * w[2][k] * psi.amp[g.index(ii, jj, kk)];
            }
        }
    }
    return acc;
}

}  // namespace detail

/// Decomposes a Cartesian momentum state. The reconstruction error compares the retained radial
/// norm with the Cartesian norm.
inline RadialState to_radial(const MomentumState& psi, const RadialGrid& g, int l_max, double max_error = 1e-6,
                             int angular_order = 0) {
    require(psi.grid.chart == Chart::momentum, ErrorKind::invalid_chart, "to_radial needs a momentum-chart state");
    RadialState s = radial_from_function(
        g, l_max, psi.xi, [&](const Vec3& q) { return detail::interpolate_grid(psi, q); }, angular_order);
    const double cart = norm(psi) * norm(psi);
    s.reconstruction_error = std::max(s.reconstruction_error, std::abs(norm2(s) - cart) / cart);
    s.full_norm2 = cart;
    if (s.reconstruction_error > max_error)
        fail(ErrorKind::truncation, "radial reconstruction error " + std::to_string(s.reconstruction_error) +
                                        " exceeds bound");
    return s;
}

/// Cubic Lagrange interpolation of one channel in u = ln r; zero outside the grid.
inline complex channel_at(const RadialGrid& g, const std::vector<complex>& c, double r) {
    if (r < g.r_min || r > g.r_max) return 0.0;
    const double u = std::log(r / g.r_min) / g.du();
    int base = static_cast<int>(std::floor(u)) - 1;
    base = std::clamp(base, 0, g.count - 4);
    complex acc = 0.0;
    for (int i = 0; i < 4; ++i) {
        double w = 1.0;
        for (int j = 0; j < 4; ++j)
            if (j != i) w *= (u - (base + j)) / double(i - j);
        acc += w * c[base + i];
    }
    return acc;
}

/// sum_lm psi_lm(r) Y^{l,m}(Omega) at a momentum point.
inline complex evaluate(const RadialState& s, const Vec3& p) {
    const double r = std::sqrt(norm2(p));
    const double th = r > 0.0 ? std::acos(std::clamp(p[2] / r, -1.0, 1.0)) : 0.0;
    const double ph = std::atan2(p[1], p[0]);
    const auto y = specfun::spherical_harmonics(s.l_max, th, ph);
    complex acc = 0.0;
    for (std::size_t lm = 0; lm < y.size(); ++lm) acc += channel_at(s.grid, s.channels[lm], r) * y[lm];
    return acc;
}

}  // namespace ptloc

#endif

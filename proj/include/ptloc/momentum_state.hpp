#ifndef PTLOC_MOMENTUM_STATE_HPP
#define PTLOC_MOMENTUM_STATE_HPP

// Momentum-space states on rectilinear grids, the invariant measure m d^3pi / E, and the
// Newton-Wigner transform between momentum amplitudes and position-space profiles.

#include <functional>

#include "ptloc/core.hpp"
#include "ptloc/fft.hpp"

namespace ptloc {

/// Coordinates carried by a grid. `momentum` is (pi^1, pi^2, pi^3) with measure m/E;
/// `s_chart` is (pi^1, pi^2, s) with s = sign(pi^3) E and flat measure; `position` is x.
enum class Chart { momentum, s_chart, position };

inline const char* to_string(Chart c) {
    switch (c) {
        case Chart::momentum: return "momentum";
        case Chart::s_chart: return "s-chart";
        case Chart::position: return "position";
    }
    return "?";
}

struct Axis {
    double origin = 0.0;
    double step = 1.0;
    int count = 0;

    double at(int i) const { return origin + i * step; }
    double last() const { return at(count - 1); }
    bool operator==(const Axis&) const = default;
};

struct Grid3 {
    std::array<Axis, 3> axes{};
    double mass = 1.0;
    Chart chart = Chart::momentum;

    bool operator==(const Grid3&) const = default;

    std::size_t size() const {
        return static_cast<std::size_t>(axes[0].count) * axes[1].count * axes[2].count;
    }
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * axes[1].count + j) * axes[2].count + k;
    }
    std::array<int, 3> unflatten(std::size_t idx) const {
        const int k = static_cast<int>(idx % axes[2].count);
        const std::size_t r = idx / axes[2].count;
        return {static_cast<int>(r / axes[1].count), static_cast<int>(r % axes[1].count), k};
    }
    Vec3 node(std::size_t idx) const {
        const auto [i, j, k] = unflatten(idx);
        return {axes[0].at(i), axes[1].at(j), axes[2].at(k)};
    }
    std::array<int, 3> counts() const { return {axes[0].count, axes[1].count, axes[2].count}; }
    double cell_volume() const { return axes[0].step * axes[1].step * axes[2].step; }

    /// Quadrature weight density of the chart (without the cell volume).
    double measure(const Vec3& q) const {
        return chart == Chart::momentum ? mass / energy(q, mass) : 1.0;
    }
};

/// Cubic momentum grid with N nodes per axis spanning [c - pmax, c + pmax). With
/// `kijowski_safe` the nodes are offset by half a cell so no node lies on pi^3 = c^3.
inline Grid3 cartesian_grid(int n, double pmax, double mass = 1.0, bool kijowski_safe = false,
                            Vec3 center = {0.0, 0.0, 0.0}) {
    require(n >= 8, ErrorKind::invalid_input, "grid needs at least 8 points per axis");
    require(pmax > 0.0 && mass > 0.0, ErrorKind::invalid_input, "grid extent and mass must be positive");
    Grid3 g;
    g.mass = mass;
    const double h = 2.0 * pmax / n;
    for (int a = 0; a < 3; ++a)
        g.axes[a] = {center[a] - pmax + (kijowski_safe ? 0.5 * h : 0.0), h, n};
    return g;
}

struct MomentumState {
    Grid3 grid;
    std::vector<complex> amp;
    EnergySign xi = EnergySign::positive;
};

inline void check_compatible(const MomentumState& a, const MomentumState& b) {
    if (!(a.grid == b.grid) || a.xi != b.xi || a.amp.size() != b.amp.size())
        fail(ErrorKind::incompatible_state, "states live on different grids or energy signs");
}

/// Precomputed quadrature weights (measure times cell volume) per node.
inline std::vector<double> measure_weights(const Grid3& g) {
    std::vector<double> w(g.size());
    const double dv = g.cell_volume();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = g.measure(g.node(i)) * dv;
    return w;
}

/// <phi|psi> with respect to the chart measure.
inline complex inner_product(const MomentumState& phi, const MomentumState& psi) {
    check_compatible(phi, psi);
    const auto w = measure_weights(psi.grid);
    std::vector<complex> terms(psi.amp.size());
    for (std::size_t i = 0; i < terms.size(); ++i) terms[i] = w[i] * std::conj(phi.amp[i]) * psi.amp[i];
    return pairwise_sum(terms);
}

inline double norm(const MomentumState& psi) { return std::sqrt(inner_product(psi, psi).real()); }

inline MomentumState normalized(MomentumState psi) {
    const double n = norm(psi);
    require(n > 0.0 && std::isfinite(n), ErrorKind::numerical_domain, "state has zero or non-finite norm");
    for (auto& a : psi.amp) a /= n;
    return psi;
}

inline void check_finite(const MomentumState& psi) {
    for (const auto& a : psi.amp)
        if (!std::isfinite(a.real()) || !std::isfinite(a.imag()))
            fail(ErrorKind::numerical_domain, "non-finite amplitude");
}

/// Samples an amplitude function at the grid nodes.
inline MomentumState sample_state(const Grid3& g, EnergySign xi,
                                  const std::function<complex(const Vec3&)>& f) {
    MomentumState s{g, std::vector<complex>(g.size()), xi};
    parallel_for(g.size(), [&](std::size_t i) { s.amp[i] = f(g.node(i)); });
    check_finite(s);
    return s;
}

/// Expectation of a multiplicative function f(pi) under the chart measure.
inline complex expect_multiplier(const MomentumState& psi,
                                 const std::function<complex(const Vec3&)>& f) {
    const auto w = measure_weights(psi.grid);
    std::vector<complex> terms(psi.amp.size());
    for (std::size_t i = 0; i < terms.size(); ++i)
        terms[i] = w[i] * f(psi.grid.node(i)) * std::norm(psi.amp[i]);
    return pairwise_sum(terms);
}

struct GaussianSpec {
    Vec3 center{};       // momentum centre pi_0
    double width = 0.5;  // sigma
    Vec3 position{};     // x_0, enters as exp(-i pi.x_0)
};

/// psi ~ exp(-|pi - pi_0|^2 / (4 sigma^2)) exp(-i pi.x_0), normalized under the chart measure.
inline MomentumState gaussian_state(const Grid3& g, const GaussianSpec& spec,
                                    EnergySign xi = EnergySign::positive) {
    require(g.chart == Chart::momentum, ErrorKind::invalid_chart, "gaussian_state needs a momentum grid");
    require(spec.width > 0.0, ErrorKind::invalid_input, "gaussian width must be positive");
    double tail = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double lo = g.axes[a].origin - 0.5 * g.axes[a].step;
        const double hi = g.axes[a].last() + 0.5 * g.axes[a].step;
        const double dlo = spec.center[a] - lo;
        const double dhi = hi - spec.center[a];
        if (dlo <= 5.0 * spec.width || dhi <= 5.0 * spec.width)
            fail(ErrorKind::invalid_input, "gaussian support (5 sigma) leaves the grid");
        const double s = spec.width * std::sqrt(2.0);
        tail += 0.5 * std::erfc(dlo / s) + 0.5 * std::erfc(dhi / s);
    }
    if (tail > 1e-8) fail(ErrorKind::resolution, "gaussian tail mass outside grid exceeds 1e-8");
    const double inv = 1.0 / (4.0 * spec.width * spec.width);
    auto f = [&](const Vec3& p) {
        const Vec3 d{p[0] - spec.center[0], p[1] - spec.center[1], p[2] - spec.center[2]};
        const double phase = -(p[0] * spec.position[0] + p[1] * spec.position[1] + p[2] * spec.position[2]);
        return std::polar(std::exp(-norm2(d) * inv), phase);
    };
    return normalized(sample_state(g, xi, f));
}

// ---------------------------------------------------------------------------------------------
// Newton-Wigner transform

/// Position-space amplitude on the grid dual to a momentum grid.
struct PositionField {
    Grid3 grid;  // chart == position
    std::vector<complex> amp;
};

/// Spatial grid reciprocal to `g`: dx = 2 pi / (N h), nodes -N dx / 2 + n dx.
inline Grid3 dual_position_grid(const Grid3& g) {
    Grid3 x;
    x.mass = g.mass;
    x.chart = Chart::position;
    for (int a = 0; a < 3; ++a) {
        const int n = g.axes[a].count;
        const double dx = 2.0 * pi / (n * g.axes[a].step);
        x.axes[a] = {-0.5 * n * dx, dx, n};
    }
    return x;
}

namespace detail {

inline std::vector<complex> axis_phase(const Axis& from, double to_origin, double sign) {
    std::vector<complex> ph(from.count);
    for (int k = 0; k < from.count; ++k) ph[k] = std::polar(1.0, sign * k * from.step * to_origin);
    return ph;
}

inline void multiply_separable(std::vector<complex>& data, const Grid3& g,
                               const std::array<std::vector<complex>, 3>& ph) {
    const auto n = g.counts();
    for (int i = 0; i < n[0]; ++i)
        for (int j = 0; j < n[1]; ++j) {
            const complex ij = ph[0][i] * ph[1][j];
            complex* row = data.data() + g.index(i, j, 0);
            for (int k = 0; k < n[2]; ++k) row[k] *= ij * ph[2][k];
        }
}

}  // namespace detail

/// phi(x) = (2 pi)^{-3/2} int d^3pi sqrt(m/E) exp(-i xi E t) exp(i pi.x) psi(pi) on the dual grid.
inline PositionField nw_transform(const MomentumState& psi, double t) {
    const Grid3& g = psi.grid;
    require(g.chart == Chart::momentum, ErrorKind::invalid_chart, "NW transform needs a momentum-chart state");
    const Grid3 xg = dual_position_grid(g);
    const double xi = sign_value(psi.xi);
    std::vector<complex> data(g.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double e = energy(g.node(i), g.mass);
        data[i] = std::sqrt(g.mass / e) * std::polar(1.0, -xi * e * t) * psi.amp[i];
    }
    std::array<std::vector<complex>, 3> pre, post;
    for (int a = 0; a < 3; ++a) {
        pre[a] = detail::axis_phase(g.axes[a], xg.axes[a].origin, 1.0);
        post[a].resize(xg.axes[a].count);
        for (int n = 0; n < xg.axes[a].count; ++n)
            post[a][n] = std::polar(1.0, g.axes[a].origin * xg.axes[a].at(n));
    }
    detail::multiply_separable(data, g, pre);
    const auto n = g.counts();
    fft::transform3(data, n[0], n[1], n[2], fft::Direction::backward);
    detail::multiply_separable(data, xg, post);
    const double c = std::pow(2.0 * pi, -1.5) * g.cell_volume();
    for (auto& v : data) v *= c;
    return {xg, std::move(data)};
}

/// Single-point NW amplitude by direct summation; O(N^3).
inline complex nw_amplitude(const MomentumState& psi, const Vec3& x, double t) {
    const Grid3& g = psi.grid;
    require(g.chart == Chart::momentum, ErrorKind::invalid_chart, "NW amplitude needs a momentum-chart state");
    const double xi = sign_value(psi.xi);
    std::vector<complex> terms(g.size());
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const Vec3 p = g.node(i);
        const double e = energy(p, g.mass);
        const double ph = -xi * e * t + p[0] * x[0] + p[1] * x[1] + p[2] * x[2];
        terms[i] = std::sqrt(g.mass / e) * std::polar(1.0, ph) * psi.amp[i];
    }
    return std::pow(2.0 * pi, -1.5) * g.cell_volume() * pairwise_sum(terms);
}

/// Fraction of the measure within `cells` nodes of any grid face.
inline double edge_fraction(const MomentumState& psi, int cells) {
    const Grid3& g = psi.grid;
    const auto w = measure_weights(g);
    std::vector<double> edge, all;
    edge.reserve(g.size());
    all.reserve(g.size());
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        const double m = w[idx] * std::norm(psi.amp[idx]);
        all.push_back(m);
        const auto ijk = g.unflatten(idx);
        bool near = false;
        for (int a = 0; a < 3; ++a)
            near = near || ijk[a] < cells || ijk[a] >= g.axes[a].count - cells;
        if (near) edge.push_back(m);
    }
    const double tot = pairwise_sum(all);
    return tot > 0.0 ? pairwise_sum(edge) / tot : 0.0;
}

/// Inverse NW transform: psi(pi) = (2 pi)^{-3/2} sqrt(E/m) exp(i xi E t) int d^3x exp(-i pi.x) phi(x).
/// `g` is the target momentum grid; `field.grid` must be its dual.
inline MomentumState nw_state_from_profile(const PositionField& field, const Grid3& g, double t,
                                           EnergySign xi = EnergySign::positive) {
    require(g.chart == Chart::momentum, ErrorKind::invalid_chart, "target grid must be a momentum grid");
    const Grid3 xg = dual_position_grid(g);
    if (!(xg.axes == field.grid.axes)) fail(ErrorKind::incompatible_state, "profile grid is not dual to target grid");
    std::vector<complex> data = field.amp;
    std::array<std::vector<complex>, 3> pre, post;
    for (int a = 0; a < 3; ++a) {
        pre[a].resize(xg.axes[a].count);
        for (int n = 0; n < xg.axes[a].count; ++n)
            pre[a][n] = std::polar(1.0, -g.axes[a].origin * xg.axes[a].at(n));
        post[a] = detail::axis_phase(g.axes[a], xg.axes[a].origin, -1.0);
    }
    detail::multiply_separable(data, xg, pre);
    const auto n = g.counts();
    fft::transform3(data, n[0], n[1], n[2], fft::Direction::forward);
    detail::multiply_separable(data, g, post);
    const double c = std::pow(2.0 * pi, -1.5) * xg.cell_volume();
    const double s = sign_value(xi);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double e = energy(g.node(i), g.mass);
        data[i] *= c * std::sqrt(e / g.mass) * std::polar(1.0, s * e * t);
    }
    MomentumState psi{g, std::move(data), xi};
    if (edge_fraction(psi, 3) > 1e-6)
        fail(ErrorKind::resolution, "profile aliases: spectral mass near the momentum-grid edge exceeds 1e-6");
    return psi;
}

inline PositionField sample_profile(const Grid3& momentum_grid,
                                    const std::function<complex(const Vec3&)>& f) {
    const Grid3 xg = dual_position_grid(momentum_grid);
    PositionField out{xg, std::vector<complex>(xg.size())};
    for (std::size_t i = 0; i < out.amp.size(); ++i) out.amp[i] = f(xg.node(i));
    return out;
}

/// sum_x |phi|^2 dx^3.
inline double field_norm2(const PositionField& f) {
    std::vector<double> t(f.amp.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::norm(f.amp[i]);
    return pairwise_sum(t) * f.grid.cell_volume();
}

/// Exponential decay rate of the radially binned NW density beyond its median radius.
/// A diagnostic for how strongly a state is localized; not a constraint.
inline double nw_tail_decay(const PositionField& f, int bins = 64) {
    double rmax = 0.0;
    for (int a = 0; a < 3; ++a) rmax = std::max(rmax, -f.grid.axes[a].origin);
    std::vector<double> mass(bins, 0.0), count(bins, 0.0);
    for (std::size_t i = 0; i < f.amp.size(); ++i) {
        const double r = std::sqrt(norm2(f.grid.node(i)));
        const int b = static_cast<int>(r / rmax * bins);
        if (b >= bins) continue;
        mass[b] += std::norm(f.amp[i]);
        count[b] += 1.0;
    }
    double total = 0.0;
    for (double m : mass) total += m;
    double acc = 0.0;
    int start = 0;
    for (; start < bins; ++start) {
        acc += mass[start];
        if (acc >= 0.5 * total) break;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (int b = start; b < bins; ++b) {
        if (count[b] == 0.0 || mass[b] <= 1e-300) continue;
        const double x = (b + 0.5) * rmax / bins;
        const double y = std::log(mass[b] / count[b]);
        sx += x, sy += y, sxx += x * x, sxy += x * y;
        ++n;
    }
    if (n < 2) return 0.0;
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return -slope;
}

// ---------------------------------------------------------------------------------------------
// Radial (l = 0) Newton-Wigner transform used for large one-dimensional light-cone runs.

/// Uniform radial grid r_n = n dr, n = 1..N-1, with momentum partner p_k = k pi / (N dr).
struct RadialLine {
    int n = 0;
    double dr = 0.0;
    double mass = 1.0;

    double r(int i) const { return (i + 1) * dr; }
    double dp() const { return pi / (n * dr); }
    double p(int k) const { return (k + 1) * dp(); }
    int size() const { return n - 1; }
};

/// Spherically symmetric profile stored as u(r) = r phi(r).
struct RadialProfile {
    RadialLine line;
    std::vector<complex> u;
};

/// Spherically symmetric momentum amplitude stored as g(p) = p sqrt(m/E) psi(p).
struct RadialMomentum {
    RadialLine line;
    std::vector<complex> g;
    EnergySign xi = EnergySign::positive;
};

namespace detail {

inline std::vector<complex> sine_transform(const std::vector<complex>& in, double step) {
    std::vector<double> re(in.size()), im(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) re[i] = in[i].real(), im[i] = in[i].imag();
    const auto a = fft::dst1(std::move(re));
    const auto b = fft::dst1(std::move(im));
    // Unitary sine transform sqrt(2/pi) int f sin(pr); dst1 carries a factor 2.
    const double c = std::sqrt(2.0 / pi) * step * 0.5;
    std::vector<complex> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = c * complex(a[i], b[i]);
    return out;
}

}  // namespace detail

inline RadialMomentum radial_state_from_profile(const RadialProfile& prof, EnergySign xi = EnergySign::positive) {
    return {prof.line, detail::sine_transform(prof.u, prof.line.dr), xi};
}

/// u(r, t) from the momentum amplitude evolved with exp(-i xi E t).
inline RadialProfile radial_nw_profile(const RadialMomentum& psi, double t) {
    const auto& l = psi.line;
    std::vector<complex> g(psi.g.size());
    const double s = sign_value(psi.xi);
    for (int k = 0; k < l.size(); ++k)
        g[k] = psi.g[k] * std::polar(1.0, -s * std::sqrt(l.p(k) * l.p(k) + l.mass * l.mass) * t);
    return {l, detail::sine_transform(g, l.dp())};
}

/// 4 pi int |u|^2 dr over r > r0.
inline double radial_mass_beyond(const RadialProfile& prof, double r0) {
    std::vector<double> t;
    for (int i = 0; i < prof.line.size(); ++i)
        if (prof.line.r(i) > r0) t.push_back(std::norm(prof.u[i]));
    return 4.0 * pi * prof.line.dr * pairwise_sum(t);
}

inline double radial_norm2(const RadialProfile& prof) { return radial_mass_beyond(prof, -1.0); }

}  // namespace ptloc

#endif

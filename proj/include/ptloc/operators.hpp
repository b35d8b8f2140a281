#ifndef PTLOC_OPERATORS_HPP
#define PTLOC_OPERATORS_HPP

// First-order differential operators c(pi) + a^k(pi) d/dpi_k in momentum space: the
// proper-time four-position acting rules, the Newton-Wigner and Kijowski restrictions, ordered
// products, commutators and expectation values.

#include <functional>
#include <string>

#include "ptloc/derivative.hpp"
#include "ptloc/momentum_state.hpp"

namespace ptloc::ops {

/// Coefficient field evaluated at chart coordinates. An empty Field is identically zero.
using Field = std::function<complex(const Vec3&)>;

inline Field constant(complex c) {
    return [c](const Vec3&) { return c; };
}

inline Field operator+(Field a, Field b) {
    if (!a) return b;
    if (!b) return a;
    return [a = std::move(a), b = std::move(b)](const Vec3& q) { return a(q) + b(q); };
}

inline Field operator*(Field a, Field b) {
    if (!a || !b) return {};
    return [a = std::move(a), b = std::move(b)](const Vec3& q) { return a(q) * b(q); };
}

inline Field operator*(complex s, Field a) {
    if (!a || s == 0.0) return {};
    return [s, a = std::move(a)](const Vec3& q) { return s * a(q); };
}

inline Field operator-(Field a, Field b) { return std::move(a) + complex(-1.0) * std::move(b); }

/// d field / d q_k by Richardson-extrapolated central differences.
inline Field partial(Field f, int k, double h = 1e-3) {
    if (!f) return {};
    return [f = std::move(f), k, h](const Vec3& q) {
        auto at = [&](double d) {
            Vec3 p = q;
            p[k] += d;
            return f(p);
        };
        const complex coarse = (at(h) - at(-h)) / (2.0 * h);
        const complex fine = (at(0.5 * h) - at(-0.5 * h)) / h;
        return (4.0 * fine - coarse) / 3.0;
    };
}

struct FirstOrderOperator {
    Field scalar;
    std::array<Field, 3> deriv;
    EnergySign xi = EnergySign::positive;
    Chart chart = Chart::momentum;
    /// Operators with 1/pi^3 coefficients refuse states with measure near pi^3 = 0.
    bool singular_guard = false;
    std::string label;

    bool multiplicative() const { return !deriv[0] && !deriv[1] && !deriv[2]; }
};

inline void check_same_space(const FirstOrderOperator& a, const FirstOrderOperator& b) {
    if (a.chart != b.chart) fail(ErrorKind::invalid_chart, "operators act in different charts");
    if (a.xi != b.xi) fail(ErrorKind::incompatible_state, "operators act on different energy-sign subspaces");
}

inline FirstOrderOperator operator+(const FirstOrderOperator& a, const FirstOrderOperator& b) {
    check_same_space(a, b);
    FirstOrderOperator r = a;
    r.scalar = a.scalar + b.scalar;
    for (int k = 0; k < 3; ++k) r.deriv[k] = a.deriv[k] + b.deriv[k];
    r.singular_guard = a.singular_guard || b.singular_guard;
    r.label = "(" + a.label + " + " + b.label + ")";
    return r;
}

inline FirstOrderOperator operator*(complex s, const FirstOrderOperator& a) {
    FirstOrderOperator r = a;
    r.scalar = s * a.scalar;
    for (int k = 0; k < 3; ++k) r.deriv[k] = s * a.deriv[k];
    return r;
}

inline FirstOrderOperator operator-(const FirstOrderOperator& a, const FirstOrderOperator& b) {
    FirstOrderOperator r = a + complex(-1.0) * b;
    r.label = "(" + a.label + " - " + b.label + ")";
    return r;
}

inline FirstOrderOperator multiplication(Field f, EnergySign xi, Chart chart = Chart::momentum,
                                         std::string label = "f") {
    FirstOrderOperator r;
    r.scalar = std::move(f);
    r.xi = xi;
    r.chart = chart;
    r.label = std::move(label);
    return r;
}

inline FirstOrderOperator identity(EnergySign xi, Chart chart = Chart::momentum) {
    return multiplication(constant(1.0), xi, chart, "I");
}

/// Pi^mu as a multiplication; the time component is xi E.
inline FirstOrderOperator momentum(int mu, EnergySign xi, double mass) {
    require(mu >= 0 && mu <= 3, ErrorKind::invalid_input, "momentum index out of range");
    if (mu == 0) {
        const double s = sign_value(xi);
        return multiplication([s, mass](const Vec3& p) { return complex(s * energy(p, mass)); }, xi,
                              Chart::momentum, "Pi^0");
    }
    return multiplication([k = mu - 1](const Vec3& p) { return complex(p[k]); }, xi, Chart::momentum,
                          "Pi^" + std::to_string(mu));
}

/// [A, B] as a first-order operator; second-order parts cancel, coefficient derivatives are
/// taken numerically from the closures.
inline FirstOrderOperator commutator(const FirstOrderOperator& a, const FirstOrderOperator& b) {
    check_same_space(a, b);
    FirstOrderOperator r;
    r.xi = a.xi;
    r.chart = a.chart;
    r.singular_guard = a.singular_guard || b.singular_guard;
    r.label = "[" + a.label + ", " + b.label + "]";
    for (int k = 0; k < 3; ++k) {
        r.scalar = r.scalar + a.deriv[k] * partial(b.scalar, k) - b.deriv[k] * partial(a.scalar, k);
        for (int l = 0; l < 3; ++l)
            r.deriv[l] = r.deriv[l] + a.deriv[k] * partial(b.deriv[l], k) - b.deriv[k] * partial(a.deriv[l], k);
    }
    return r;
}

/// Placement of a multiplicative factor g relative to a first-order operator D.
enum class Ordering {
    symmetric,  // (gD + Dg) / 2
    left,       // g D
    right,      // D g
};

inline const char* to_string(Ordering o) {
    switch (o) {
        case Ordering::symmetric: return "symmetric";
        case Ordering::left: return "left";
        case Ordering::right: return "right";
    }
    return "?";
}

/// g : D. For the symmetric ordering this is gD + (1/2) a^k (d_k g).
inline FirstOrderOperator ordered_product(const FirstOrderOperator& g, const FirstOrderOperator& d,
                                          Ordering ordering = Ordering::symmetric) {
    if (!g.multiplicative()) fail(ErrorKind::invalid_composition, "ordered product needs a multiplicative factor");
    check_same_space(g, d);
    FirstOrderOperator r;
    r.xi = d.xi;
    r.chart = d.chart;
    r.singular_guard = g.singular_guard || d.singular_guard;
    r.label = g.label + ":" + d.label;
    r.scalar = g.scalar * d.scalar;
    for (int k = 0; k < 3; ++k) r.deriv[k] = g.scalar * d.deriv[k];
    const double weight = ordering == Ordering::symmetric ? 0.5 : (ordering == Ordering::right ? 1.0 : 0.0);
    if (weight != 0.0)
        for (int k = 0; k < 3; ++k) r.scalar = r.scalar + complex(weight) * (d.deriv[k] * partial(g.scalar, k));
    return r;
}

inline FirstOrderOperator sym_product(const FirstOrderOperator& g, const FirstOrderOperator& d) {
    return ordered_product(g, d, Ordering::symmetric);
}

// ---------------------------------------------------------------------------------------------
// Acting rules

/// Q^0_phys(tau) = xi (E/m) [(i/m)(pi.grad + 3/2) + tau].
inline FirstOrderOperator q0_phys(double tau, EnergySign xi, double mass) {
    const double s = sign_value(xi);
    FirstOrderOperator r;
    r.xi = xi;
    r.label = "Q0(" + std::to_string(tau) + ")";
    r.scalar = [=](const Vec3& p) { return s * energy(p, mass) / mass * (complex(0.0, 1.5 / mass) + tau); };
    for (int k = 0; k < 3; ++k)
        r.deriv[k] = [=](const Vec3& p) { return complex(0.0, s * energy(p, mass) / (mass * mass) * p[k]); };
    return r;
}

/// Q^j_phys(tau) = xi [ i (d_j + (pi^j/m^2) pi.grad + (3/2) pi^j/m^2) + pi^j tau / m ].
inline FirstOrderOperator q_phys(int j, double tau, EnergySign xi, double mass) {
    require(j >= 1 && j <= 3, ErrorKind::invalid_input, "spatial index must be 1..3");
    const double s = sign_value(xi);
    const int a = j - 1;
    const double m2 = mass * mass;
    FirstOrderOperator r;
    r.xi = xi;
    r.label = "Q" + std::to_string(j) + "(" + std::to_string(tau) + ")";
    r.scalar = [=](const Vec3& p) { return s * complex(p[a] * tau / mass, 1.5 * p[a] / m2); };
    for (int k = 0; k < 3; ++k)
        r.deriv[k] = [=](const Vec3& p) { return complex(0.0, s * ((k == a ? 1.0 : 0.0) + p[a] * p[k] / m2)); };
    return r;
}

/// X^j_NW(t) = xi i (d_j - pi^j / (2 E^2)) + (pi^j / E) t.
inline FirstOrderOperator newton_wigner(int j, double t, EnergySign xi, double mass) {
    require(j >= 1 && j <= 3, ErrorKind::invalid_input, "spatial index must be 1..3");
    const double s = sign_value(xi);
    const int a = j - 1;
    FirstOrderOperator r;
    r.xi = xi;
    r.label = "X" + std::to_string(j) + "_NW(" + std::to_string(t) + ")";
    r.scalar = [=](const Vec3& p) {
        const double e = energy(p, mass);
        return complex(p[a] / e * t, -s * p[a] / (2.0 * e * e));
    };
    r.deriv[a] = constant(complex(0.0, s));
    return r;
}

/// The velocity factor pi^j / E_pi entering the decomposition of X_NW.
inline FirstOrderOperator velocity(int j, EnergySign xi, double mass) {
    const int a = j - 1;
    return multiplication([=](const Vec3& p) { return complex(p[a] / energy(p, mass)); }, xi,
                          Chart::momentum, "Pi^" + std::to_string(j) + "/E");
}

/// Restriction of Q^0 to the instantaneous surface at t: the scalar t.
inline FirstOrderOperator restricted_q0_instantaneous(double t, EnergySign xi) {
    return complex(t) * identity(xi);
}

/// Restriction of Q^3 to the detector plane z: the scalar z.
inline FirstOrderOperator restricted_q3_fixed_z(double z, EnergySign xi, Chart chart = Chart::momentum) {
    return complex(z) * identity(xi, chart);
}

// ---------------------------------------------------------------------------------------------
// Application

inline void check_domain(const FirstOrderOperator& op, const MomentumState& psi) {
    if (op.chart != psi.grid.chart)
        fail(ErrorKind::invalid_chart, std::string("operator chart ") + to_string(op.chart) +
                                           " does not match state chart " + to_string(psi.grid.chart));
    if (op.xi != psi.xi) fail(ErrorKind::incompatible_state, "energy sign mismatch between operator and state");
    if (!op.singular_guard) return;
    const Grid3& g = psi.grid;
    const double strip = 3.0 * g.axes[2].step;
    const auto w = measure_weights(g);
    std::vector<double> near, all;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double m = w[i] * std::norm(psi.amp[i]);
        all.push_back(m);
        const Vec3 q = g.node(i);
        double pz;
        if (g.chart == Chart::s_chart) {
            const double d = q[2] * q[2] - q[0] * q[0] - q[1] * q[1] - g.mass * g.mass;
            pz = d > 0.0 ? std::sqrt(d) : 0.0;
        } else {
            pz = std::abs(q[2]);
        }
        if (pz < strip) near.push_back(m);
    }
    const double tot = pairwise_sum(all);
    if (tot > 0.0 && pairwise_sum(near) > 1e-8 * tot)
        fail(ErrorKind::singular_domain, "state has more than 1e-8 of its measure near pi^3 = 0");
}

/// Coefficients sampled once on a grid: composed closures are expensive, and a scan applying the
/// same operator to many states on one grid need not re-evaluate them.
struct TabulatedOperator {
    FirstOrderOperator op;  // kept for the domain checks
    Grid3 grid;
    std::vector<complex> scalar;
    std::array<std::vector<complex>, 3> deriv;
};

inline TabulatedOperator tabulate(const FirstOrderOperator& op, const Grid3& g) {
    if (op.chart != g.chart) fail(ErrorKind::invalid_chart, "operator and grid use different charts");
    TabulatedOperator t{op, g, {}, {}};
    auto sample = [&](const Field& f, std::vector<complex>& out) {
        if (!f) return;
        out.resize(g.size());
        parallel_for(g.size(), [&](std::size_t i) { out[i] = f(g.node(i)); });
    };
    sample(op.scalar, t.scalar);
    for (int k = 0; k < 3; ++k) sample(op.deriv[k], t.deriv[k]);
    return t;
}

inline MomentumState apply(const TabulatedOperator& t, const MomentumState& psi,
                           DerivativeScheme scheme = DerivativeScheme::central8) {
    if (!(t.grid == psi.grid)) fail(ErrorKind::incompatible_state, "state grid differs from the tabulation grid");
    check_domain(t.op, psi);
    const Grid3& g = psi.grid;
    MomentumState out{g, std::vector<complex>(g.size(), 0.0), psi.xi};
    if (!t.scalar.empty())
        for (std::size_t i = 0; i < g.size(); ++i) out.amp[i] = t.scalar[i] * psi.amp[i];
    for (int k = 0; k < 3; ++k) {
        if (t.deriv[k].empty()) continue;
        const auto d = axis_derivative(g, psi.amp, k, scheme);
        for (std::size_t i = 0; i < g.size(); ++i) out.amp[i] += t.deriv[k][i] * d[i];
    }
    check_finite(out);
    return out;
}

inline MomentumState apply(const FirstOrderOperator& op, const MomentumState& psi,
                           DerivativeScheme scheme = DerivativeScheme::central8) {
    check_domain(op, psi);
    const Grid3& g = psi.grid;
    MomentumState out{g, std::vector<complex>(g.size(), 0.0), psi.xi};
    if (op.scalar)
        parallel_for(g.size(), [&](std::size_t i) { out.amp[i] = op.scalar(g.node(i)) * psi.amp[i]; });
    for (int k = 0; k < 3; ++k) {
        if (!op.deriv[k]) continue;
        const auto d = axis_derivative(g, psi.amp, k, scheme);
        parallel_for(g.size(), [&](std::size_t i) { out.amp[i] += op.deriv[k](g.node(i)) * d[i]; });
    }
    check_finite(out);
    return out;
}

/// (op f)(q) for an amplitude given as a function; derivatives by Richardson central differences.
/// Chart and sign checks are the caller's responsibility.
inline Field apply_to_function(const FirstOrderOperator& op, const Field& f, double h = 1e-3) {
    std::array<Field, 3> df;
    for (int k = 0; k < 3; ++k)
        if (op.deriv[k]) df[k] = partial(f, k, h);
    return [op, f, df](const Vec3& q) {
        complex v = op.scalar ? op.scalar(q) * f(q) : complex(0.0);
        for (int k = 0; k < 3; ++k)
            if (op.deriv[k]) v += op.deriv[k](q) * df[k](q);
        return v;
    };
}

inline complex expectation(const FirstOrderOperator& op, const MomentumState& psi,
                           DerivativeScheme scheme = DerivativeScheme::central8) {
    return inner_product(psi, apply(op, psi, scheme));
}

/// <op^2> - <op>^2 with op applied twice.
inline double variance(const FirstOrderOperator& op, const MomentumState& psi,
                       DerivativeScheme scheme = DerivativeScheme::central8) {
    const MomentumState once = apply(op, psi, scheme);
    const complex mean = inner_product(psi, once);
    const complex second = inner_product(psi, apply(op, once, scheme));
    return (second - mean * mean).real();
}

/// ||psi|| under the chart measure, for any state.
inline double chart_norm(const MomentumState& psi) { return norm(psi); }

/// ||A psi - B psi|| / ||psi||.
inline double relative_difference(const FirstOrderOperator& a, const FirstOrderOperator& b,
                                  const MomentumState& psi,
                                  DerivativeScheme scheme = DerivativeScheme::central8) {
    MomentumState x = apply(a, psi, scheme);
    const MomentumState y = apply(b, psi, scheme);
    for (std::size_t i = 0; i < x.amp.size(); ++i) x.amp[i] -= y.amp[i];
    return norm(x) / norm(psi);
}

/// The right-hand side of X_NW = Q^j - (Pi^j/Pi^0):Q^0 + (Pi^j/Pi^0) t with a chosen ordering.
inline FirstOrderOperator nw_from_four_position(int j, double t, EnergySign xi, double mass,
                                                Ordering ordering = Ordering::symmetric, double tau = 0.0) {
    const FirstOrderOperator g = velocity(j, xi, mass);
    FirstOrderOperator r = q_phys(j, tau, xi, mass) - ordered_product(g, q0_phys(tau, xi, mass), ordering) +
                           complex(t) * g;
    r.label = "Qj - g:Q0 + g t [" + std::string(to_string(ordering)) + "]";
    return r;
}

/// ||X_NW(t) psi - [Q^j - g:Q^0 + g t] psi|| / ||psi||.
inline double nw_decomposition_residual(const MomentumState& psi, int j, double t,
                                        Ordering ordering = Ordering::symmetric,
                                        DerivativeScheme scheme = DerivativeScheme::central8, double tau = 0.0) {
    const double m = psi.grid.mass;
    return relative_difference(newton_wigner(j, t, psi.xi, m),
                               nw_from_four_position(j, t, psi.xi, m, ordering, tau), psi, scheme);
}

// ---------------------------------------------------------------------------------------------
// Kijowski detector-plane operators

/// Prefactor of the time operator in the pi-chart. `energy_over_pz` (E / pi^3) is the form that
/// agrees with the s-chart rule and the classical slope; `energy_over_mass` keeps E / m.
enum class KijowskiPrefactor { energy_over_pz, energy_over_mass };

/// pi-chart detection-time operator at plane z:
/// P(pi) [ xi i (-d_3 + 1/(2 pi^3)) + z ] with P = E/pi^3 (default) or E/m.
inline FirstOrderOperator kijowski_time_pi(double z, EnergySign xi, double mass,
                                           KijowskiPrefactor pre = KijowskiPrefactor::energy_over_pz) {
    const double s = sign_value(xi);
    const bool over_pz = pre == KijowskiPrefactor::energy_over_pz;
    auto factor = [=](const Vec3& p) { return energy(p, mass) / (over_pz ? p[2] : mass); };
    FirstOrderOperator r;
    r.xi = xi;
    r.singular_guard = true;
    r.label = "T_pi(" + std::to_string(z) + ")";
    r.scalar = [=](const Vec3& p) { return factor(p) * complex(z, s / (2.0 * p[2])); };
    r.deriv[2] = [=](const Vec3& p) { return complex(0.0, -s * factor(p)); };
    return r;
}

/// pi-chart transverse position at plane z:
/// xi i (d_j - (pi^j/pi^3) d_3 + pi^j/(2 (pi^3)^2)) + (pi^j/pi^3) z, j in {1, 2}.
inline FirstOrderOperator kijowski_transverse_pi(int j, double z, EnergySign xi, double mass) {
    require(j == 1 || j == 2, ErrorKind::invalid_input, "transverse index must be 1 or 2");
    (void)mass;
    const double s = sign_value(xi);
    const int a = j - 1;
    FirstOrderOperator r;
    r.xi = xi;
    r.singular_guard = true;
    r.label = "Y" + std::to_string(j) + "_pi(" + std::to_string(z) + ")";
    r.scalar = [=](const Vec3& p) { return complex(p[a] / p[2] * z, s * p[a] / (2.0 * p[2] * p[2])); };
    r.deriv[a] = constant(complex(0.0, s));
    r.deriv[2] = [=](const Vec3& p) { return complex(0.0, -s * p[a] / p[2]); };
    return r;
}

/// |pi^3| at s-chart coordinates (pi^1, pi^2, s); zero outside the mass shell.
inline double s_chart_pz(const Vec3& q, double mass) {
    const double d = q[2] * q[2] - q[0] * q[0] - q[1] * q[1] - mass * mass;
    return d > 0.0 ? std::sqrt(d) : 0.0;
}

inline double signum(double x) { return (x > 0.0) - (x < 0.0); }

/// s-chart detection time: -i sign(s) d/ds + s z / sqrt(s^2 - rho^2 - m^2). Positive energy only.
inline FirstOrderOperator kijowski_time(double z, EnergySign xi, double mass) {
    if (xi != EnergySign::positive) fail(ErrorKind::invalid_chart, "the s-chart is defined on positive energy");
    FirstOrderOperator r;
    r.xi = xi;
    r.chart = Chart::s_chart;
    r.singular_guard = true;
    r.label = "T(" + std::to_string(z) + ")";
    r.scalar = [=](const Vec3& q) {
        const double pz = s_chart_pz(q, mass);
        return pz > 0.0 ? complex(q[2] * z / pz) : complex(0.0);
    };
    r.deriv[2] = [](const Vec3& q) { return complex(0.0, -signum(q[2])); };
    return r;
}

/// s-chart transverse position: i d/dpi_j + pi^j z / (sign(s) sqrt(s^2 - rho^2 - m^2)).
inline FirstOrderOperator kijowski_transverse(int j, double z, EnergySign xi, double mass) {
    require(j == 1 || j == 2, ErrorKind::invalid_input, "transverse index must be 1 or 2");
    if (xi != EnergySign::positive) fail(ErrorKind::invalid_chart, "the s-chart is defined on positive energy");
    const int a = j - 1;
    FirstOrderOperator r;
    r.xi = xi;
    r.chart = Chart::s_chart;
    r.singular_guard = true;
    r.label = "Y" + std::to_string(j) + "(" + std::to_string(z) + ")";
    r.scalar = [=](const Vec3& q) {
        const double pz = s_chart_pz(q, mass);
        return pz > 0.0 ? complex(q[a] * z / (signum(q[2]) * pz)) : complex(0.0);
    };
    r.deriv[a] = constant(complex(0.0, 1.0));
    return r;
}

// ---------------------------------------------------------------------------------------------
// Chart change pi -> (pi^1, pi^2, s), psi_z = sqrt(m / |pi^3|) psi_+.

/// s-chart grid sharing the transverse axes of `g` with the given s axis.
inline Grid3 s_chart_grid(const Grid3& g, const Axis& s_axis) {
    Grid3 out = g;
    out.chart = Chart::s_chart;
    out.axes[2] = s_axis;
    return out;
}

/// s axis covering the images of the pi^3 range of `g` (one sign, chosen by the range).
inline Axis s_axis_for(const Grid3& g, int count) {
    const double lo = g.axes[2].origin;
    const double hi = g.axes[2].last();
    require(lo * hi > 0.0, ErrorKind::singular_domain, "pi^3 range of the grid straddles zero");
    double rho2 = 0.0;
    for (int a = 0; a < 2; ++a) {
        const double r = std::max(std::abs(g.axes[a].origin), std::abs(g.axes[a].last()));
        rho2 += r * r;
    }
    const double m2 = g.mass * g.mass;
    const double amin = std::min(std::abs(lo), std::abs(hi));
    const double amax = std::max(std::abs(lo), std::abs(hi));
    const double smin = std::sqrt(amin * amin + m2);
    const double smax = std::sqrt(amax * amax + rho2 + m2);
    const double sgn = lo > 0.0 ? 1.0 : -1.0;
    const double step = (smax - smin) / (count - 1);
    return sgn > 0.0 ? Axis{smin, step, count} : Axis{-smax, step, count};
}

namespace detail {

/// 8-point Lagrange interpolation along the last axis; nodes outside the grid contribute zero.
inline complex interpolate_last_axis(const Grid3& g, const std::vector<complex>& f, int i, int j, double x) {
    const Axis& ax = g.axes[2];
    const double u = (x - ax.origin) / ax.step;
    const int base = static_cast<int>(std::floor(u)) - 3;
    if (base + 7 < 0 || base >= ax.count) return 0.0;
    complex acc = 0.0;
    for (int a = 0; a < 8; ++a) {
        const int k = base + a;
        if (k < 0 || k >= ax.count) continue;
        double w = 1.0;
        for (int b = 0; b < 8; ++b)
            if (b != a) w *= (u - (base + b)) / double(a - b);
        acc += w * f[g.index(i, j, k)];
    }
    return acc;
}

}  // namespace detail

/// Maps a positive-energy momentum-chart state to the s-chart with flat measure.
inline MomentumState to_s_chart(const MomentumState& psi, const Axis& s_axis) {
    require(psi.grid.chart == Chart::momentum, ErrorKind::invalid_chart, "source state must be in the momentum chart");
    if (psi.xi != EnergySign::positive) fail(ErrorKind::invalid_chart, "the s-chart is defined on positive energy");
    const Grid3 sg = s_chart_grid(psi.grid, s_axis);
    const double m = psi.grid.mass;
    MomentumState out{sg, std::vector<complex>(sg.size(), 0.0), psi.xi};
    parallel_for(sg.size(), [&](std::size_t idx) {
        const auto [i, j, k] = sg.unflatten(idx);
        const Vec3 q = sg.node(idx);
        const double pz = s_chart_pz(q, m);
        if (pz <= 0.0) return;
        const double p3 = signum(q[2]) * pz;
        out.amp[idx] = std::sqrt(m / pz) * detail::interpolate_last_axis(psi.grid, psi.amp, i, j, p3);
    });
    return out;
}

/// Samples psi_z directly from an amplitude function psi_+(pi).
inline MomentumState s_chart_from_function(const Grid3& sg, const std::function<complex(const Vec3&)>& f) {
    require(sg.chart == Chart::s_chart, ErrorKind::invalid_chart, "grid must be an s-chart grid");
    const double m = sg.mass;
    return sample_state(sg, EnergySign::positive, [&](const Vec3& q) -> complex {
        const double pz = s_chart_pz(q, m);
        if (pz <= 0.0) return 0.0;
        return std::sqrt(m / pz) * f({q[0], q[1], signum(q[2]) * pz});
    });
}

/// <T phi, psi> - <phi, T psi> for the s-chart time operator on a single transverse point
/// (rho = 0): a one-dimensional s line covering both detection sides, with one-sided
/// 4th-order differences at the shell edges |s| = m. Nonzero boundary values produce the defect
/// -i [conj(phi) psi](m) - i [conj(phi) psi](-m).
struct BoundaryDefect {
    complex measured;
    complex boundary_term;
};

inline BoundaryDefect kijowski_boundary_defect(const std::function<complex(double)>& phi,
                                               const std::function<complex(double)>& psi, double mass,
                                               double s_max, int n) {
    require(n >= 16 && s_max > mass, ErrorKind::invalid_input, "bad boundary-defect line");
    const double h = (s_max - mass) / (n - 1);
    // Composite Simpson weights on each side (n odd keeps them exact).
    auto weight = [&](int i) {
        if (i == 0 || i == n - 1) return h / 3.0;
        return (i % 2 ? 4.0 : 2.0) * h / 3.0;
    };
    auto deriv = [&](const std::vector<complex>& f, int i) {
        if (i >= 2 && i <= n - 3) return (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
        if (i < 2)
            return (-25.0 * f[i] + 48.0 * f[i + 1] - 36.0 * f[i + 2] + 16.0 * f[i + 3] - 3.0 * f[i + 4]) / (12.0 * h);
        return (25.0 * f[i] - 48.0 * f[i - 1] + 36.0 * f[i - 2] - 16.0 * f[i - 3] + 3.0 * f[i - 4]) / (12.0 * h);
    };
    complex lhs = 0.0, rhs = 0.0;
    for (double side : {1.0, -1.0}) {
        std::vector<complex> a(n), b(n);
        // Node 0 sits on the shell edge; s runs outward from |s| = m.
        for (int i = 0; i < n; ++i) {
            const double s = side * (mass + i * h);
            a[i] = phi(s);
            b[i] = psi(s);
        }
        for (int i = 0; i < n; ++i) {
            // d/ds = side * d/d|s|, and -i sign(s) d/ds = -i d/d|s| on both sides.
            const complex ta = complex(0.0, -1.0) * deriv(a, i);
            const complex tb = complex(0.0, -1.0) * deriv(b, i);
            lhs += weight(i) * std::conj(ta) * b[i];
            rhs += weight(i) * std::conj(a[i]) * tb;
        }
    }
    const complex boundary = complex(0.0, -1.0) * (std::conj(phi(mass)) * psi(mass) + std::conj(phi(-mass)) * psi(-mass));
    return {lhs - rhs, boundary};
}

}  // namespace ptloc::ops

#endif

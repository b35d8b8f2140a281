#ifndef PTLOC_CLASSICAL_HPP
#define PTLOC_CLASSICAL_HPP

// Classical proper-time four-position, numerical Poisson brackets on the extended 8D phase
// space, and restriction of observables to observation surfaces.

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ptloc/core.hpp"

namespace ptloc::classical {

/// Canonical state (x^mu, p_mu) of the extended phase space. The momentum is stored with upper
/// index; the canonical partner of x^mu is the lower-index component p_mu.
struct PhasePoint {
    Vec4 x{};
    Vec4 p{};
    double mass = 1.0;

    double shell_residual() const { return minkowski(p, p) + mass * mass; }
    bool on_shell(double tol = 1e-12) const { return std::abs(shell_residual()) <= tol; }
};

using PhaseFunction = std::function<double(const PhasePoint&, double tau)>;

struct ClassicalObservable {
    PhaseFunction eval;
    std::string label;

    double operator()(const PhasePoint& s, double tau) const { return eval(s, tau); }
};

/// f(Q(tau)) defining an observation surface f = 0. Surfaces that are affine in tau can expose
/// their coefficients (a, b) with f = a + b*tau so the root is found in closed form.
struct SurfaceFunction {
    PhaseFunction eval;
    std::function<std::pair<double, double>(const PhasePoint&)> affine;
    std::string label;

    double operator()(const PhasePoint& s, double tau) const { return eval(s, tau); }
};

inline void check_mass(const PhasePoint& s) {
    require(s.mass > 0.0 && std::isfinite(s.mass), ErrorKind::invalid_input, "mass must be positive");
}

/// Q^mu(tau) = -J^{mu nu} p_nu / m^2 + p^mu tau / m with J^{mu nu} = x^mu p^nu - x^nu p^mu.
inline Vec4 four_position(const PhasePoint& s, double tau) {
    check_mass(s);
    const double pp = minkowski(s.p, s.p);
    const double xp = minkowski(s.x, s.p);
    const double m2 = s.mass * s.mass;
    Vec4 q{};
    for (int mu = 0; mu < 4; ++mu) {
        const double jp = s.x[mu] * pp - s.p[mu] * xp;  // J^{mu nu} p_nu
        q[mu] = -jp / m2 + s.p[mu] * tau / s.mass;
    }
    return q;
}

struct BracketOptions {
    double step = 1e-4;
    bool richardson = true;
};

namespace detail {

inline PhasePoint shifted(const PhasePoint& s, int slot, double h) {
    PhasePoint out = s;
    if (slot < 4) {
        out.x[slot] += h;
    } else {
        const int mu = slot - 4;
        // p_mu shifted by h; the stored upper component moves by eta^{mu mu} h.
        out.p[mu] += (mu == 0 ? -h : h);
    }
    return out;
}

inline double central(const ClassicalObservable& f, const PhasePoint& s, double tau, int slot,
                      double h) {
    const double fp = f(shifted(s, slot, h), tau);
    const double fm = f(shifted(s, slot, -h), tau);
    if (!std::isfinite(fp) || !std::isfinite(fm))
        fail(ErrorKind::numerical_domain, "non-finite evaluation in stencil of " + f.label);
    return (fp - fm) / (2.0 * h);
}

inline double partial(const ClassicalObservable& f, const PhasePoint& s, double tau, int slot,
                      const BracketOptions& opt) {
    const double coarse = central(f, s, tau, slot, opt.step);
    if (!opt.richardson) return coarse;
    const double fine = central(f, s, tau, slot, 0.5 * opt.step);
    return (4.0 * fine - coarse) / 3.0;
}

}  // namespace detail

/// {f, g} = sum_mu (df/dx^mu dg/dp_mu - df/dp_mu dg/dx^mu) by central differences.
inline double poisson_bracket(const ClassicalObservable& f, const ClassicalObservable& g,
                              const PhasePoint& s, double tau, const BracketOptions& opt = {}) {
    require(opt.step > 0.0, ErrorKind::invalid_input, "bracket step must be positive");
    double acc = 0.0;
    for (int mu = 0; mu < 4; ++mu) {
        acc += detail::partial(f, s, tau, mu, opt) * detail::partial(g, s, tau, mu + 4, opt);
        acc -= detail::partial(f, s, tau, mu + 4, opt) * detail::partial(g, s, tau, mu, opt);
    }
    return acc;
}

inline void check_observer(const PhasePoint& s, const Vec4& u) {
    require(std::abs(minkowski(u, u) + 1.0) <= 1e-9, ErrorKind::invalid_input,
            "observer four-velocity must satisfy u.u = -1");
    if (std::abs(minkowski(u, s.p)) < 1e-300)
        fail(ErrorKind::degenerate_observer, "u.p vanishes");
}

/// Q~^mu(t): the four-position evaluated at the proper time where Q.u = -t.
inline Vec4 restricted_instantaneous(const PhasePoint& s, const Vec4& u, double t) {
    check_mass(s);
    check_observer(s, u);
    const Vec4 q0 = four_position(s, 0.0);
    const double up = minkowski(u, s.p);
    const double shift = (t + minkowski(q0, u)) / up;
    Vec4 out{};
    for (int mu = 0; mu < 4; ++mu) out[mu] = q0[mu] - s.p[mu] * shift;
    return out;
}

/// Observer time surface Q(tau).u + t = 0.
inline SurfaceFunction instantaneous_surface(const Vec4& u, double t) {
    SurfaceFunction f;
    f.eval = [u, t](const PhasePoint& s, double tau) { return minkowski(four_position(s, tau), u) + t; };
    f.affine = [u, t](const PhasePoint& s) {
        return std::pair{minkowski(four_position(s, 0.0), u) + t, minkowski(s.p, u) / s.mass};
    };
    f.label = "instantaneous";
    return f;
}

/// Detector plane surface Q^3(tau) - z = 0.
inline SurfaceFunction fixed_z_surface(double z) {
    SurfaceFunction f;
    f.eval = [z](const PhasePoint& s, double tau) { return four_position(s, tau)[3] - z; };
    f.affine = [z](const PhasePoint& s) {
        return std::pair{four_position(s, 0.0)[3] - z, s.p[3] / s.mass};
    };
    f.label = "fixed-z";
    return f;
}

struct RestrictOptions {
    double tau_min = -1e6;
    double tau_max = 1e6;
    int segments = 4096;
    double degeneracy = 1e-9;
    /// Use the affine coefficients when the surface provides them.
    bool closed_form = true;
};

namespace detail {

inline double slope(const SurfaceFunction& f, const PhasePoint& s, double tau) {
    const double h = 1e-6 * std::max(1.0, std::abs(tau));
    return (f(s, tau + h) - f(s, tau - h)) / (2.0 * h);
}

inline double bisect(const SurfaceFunction& f, const PhasePoint& s, double lo, double hi,
                     double flo) {
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = f(s, mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Roots of f(point, .) in the configured proper-time window.
inline std::vector<double> surface_roots(const SurfaceFunction& f, const PhasePoint& s,
                                         const RestrictOptions& opt = {}) {
    if (opt.closed_form && f.affine) {
        const auto [a, b] = f.affine(s);
        if (std::abs(b) < opt.degeneracy)
            fail(ErrorKind::degenerate_surface, "surface is stationary in proper time");
        const double tau = -a / b;
        if (tau < opt.tau_min || tau > opt.tau_max)
            fail(ErrorKind::surface_miss, "root outside proper-time window");
        return {tau};
    }
    require(opt.segments > 0 && opt.tau_max > opt.tau_min, ErrorKind::invalid_input,
            "bad proper-time window");
    std::vector<double> roots;
    const double w = (opt.tau_max - opt.tau_min) / opt.segments;
    double lo = opt.tau_min;
    double flo = f(s, lo);
    if (flo == 0.0) roots.push_back(lo);
    for (int k = 1; k <= opt.segments; ++k) {
        const double hi = (k == opt.segments) ? opt.tau_max : opt.tau_min + k * w;
        const double fhi = f(s, hi);
        if (!std::isfinite(fhi)) fail(ErrorKind::numerical_domain, "non-finite surface value");
        if (fhi == 0.0) {
            roots.push_back(hi);
        } else if (flo != 0.0 && (flo < 0.0) != (fhi < 0.0)) {
            roots.push_back(detail::bisect(f, s, lo, hi, flo));
        }
        lo = hi;
        flo = fhi;
    }
    if (roots.empty()) fail(ErrorKind::surface_miss, "no root of " + f.label + " in window");
    for (double r : roots) {
        if (std::abs(detail::slope(f, s, r)) < opt.degeneracy)
            fail(ErrorKind::degenerate_surface, "non-simple root of " + f.label);
    }
    return roots;
}

/// [A]_{f=0}: the |df/dtau|-weighted delta integral, i.e. the sum of A over the simple roots.
inline double restrict_classical(const ClassicalObservable& a, const SurfaceFunction& f,
                                 const PhasePoint& s, const RestrictOptions& opt = {}) {
    check_mass(s);
    double acc = 0.0;
    for (double r : surface_roots(f, s, opt)) acc += a(s, r);
    return acc;
}

// Observables used by the bracket identities.

inline ClassicalObservable position_coordinate(int mu) {
    return {[mu](const PhasePoint& s, double) { return s.x[mu]; }, "x^" + std::to_string(mu)};
}

inline ClassicalObservable momentum_component(int mu) {
    return {[mu](const PhasePoint& s, double) { return s.p[mu]; }, "Pi^" + std::to_string(mu)};
}

inline ClassicalObservable four_position_component(int mu) {
    return {[mu](const PhasePoint& s, double tau) { return four_position(s, tau)[mu]; },
            "Q^" + std::to_string(mu)};
}

inline ClassicalObservable restricted_component(int mu, const Vec4& u, double t) {
    return {[mu, u, t](const PhasePoint& s, double) { return restricted_instantaneous(s, u, t)[mu]; },
            "Q~^" + std::to_string(mu)};
}

/// J~^{mu nu} = Q~^mu Pi^nu - Q~^nu Pi^mu.
inline ClassicalObservable restricted_angular_momentum(int mu, int nu, const Vec4& u, double t) {
    return {[mu, nu, u, t](const PhasePoint& s, double) {
                const Vec4 q = restricted_instantaneous(s, u, t);
                return q[mu] * s.p[nu] - q[nu] * s.p[mu];
            },
            "J~^" + std::to_string(mu) + std::to_string(nu)};
}

inline double metric(int mu, int nu) { return mu != nu ? 0.0 : (mu == 0 ? -1.0 : 1.0); }

/// Mass-shell value of {Q~^mu(t), Pi^nu}: eta^{mu nu} - Pi^mu u^nu / (u.Pi).
inline double restricted_momentum_bracket(const PhasePoint& s, const Vec4& u, int mu, int nu) {
    return metric(mu, nu) - s.p[mu] * u[nu] / minkowski(u, s.p);
}

/// Classical arrival time at the plane Q^3 = z.
inline double arrival_time(const PhasePoint& s, double z) {
    const Vec4 q0 = four_position(s, 0.0);
    if (std::abs(s.p[3]) < 1e-300) fail(ErrorKind::degenerate_surface, "p^3 vanishes");
    return q0[0] + s.p[0] / s.p[3] * (z - q0[3]);
}

}  // namespace ptloc::classical

#endif

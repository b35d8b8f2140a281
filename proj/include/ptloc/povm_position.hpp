#ifndef PTLOC_POVM_POSITION_HPP
#define PTLOC_POVM_POSITION_HPP

// Position POVM on the z axis. The kernel is written in coordinates (nu, omega, phi) of the
// momentum space that are supplied at runtime; any candidate set is validated by the
// completeness of the resulting density.
//
// Overlaps factor as c(z, Lambda, m_z) = sum_nu dnu exp(i m xi z nu) G_{m_z}(nu, Lambda) with
//   G = A(Lambda) sec^{-3/2}(nu) exp(-i m tau ln sec nu) int domega dphi J exp(-i m_z phi)
//       P^{-|m_z|}_{-1/2 + i Lambda}(cosh omega) psi,
// J the dmu Jacobian of the map, A = sqrt(sinh(pi Lambda)) |Gamma(1/2 + |m_z| + i Lambda)| / (m (2pi)^{3/2}).

#include <functional>
#include <string>

#include "ptloc/operators.hpp"
#include "ptloc/radial.hpp"

namespace ptloc::povm {

/// Coordinates (nu, omega, phi) on the mass shell and their inverse.
struct PositionMaps {
    std::string name;
    std::function<std::array<double, 3>(const Vec3&)> forward;
    std::function<Vec3(double nu, double omega, double phi)> inverse;
};

/// pi^3 = m tan nu, E = m sec nu cosh omega, rho = m sec nu sinh omega, phi the azimuth.
/// One candidate set; dmu = m^3 sec^3 nu sinh omega dnu domega dphi.
inline PositionMaps hyperbolic_maps(double mass) {
    PositionMaps p;
    p.name = "hyperbolic";
    p.forward = [mass](const Vec3& q) {
        const double rho = std::hypot(q[0], q[1]);
        const double nu = std::atan(q[2] / mass);
        const double sec = 1.0 / std::cos(nu);
        return std::array<double, 3>{nu, std::asinh(rho / (mass * sec)), std::atan2(q[1], q[0])};
    };
    p.inverse = [mass](double nu, double om, double ph) {
        const double sec = 1.0 / std::cos(nu), rho = mass * sec * std::sinh(om);
        return Vec3{rho * std::cos(ph), rho * std::sin(ph), mass * std::tan(nu)};
    };
    return p;
}

/// Lambda(lambda) = sqrt(-lambda - 1/4) for lambda <= -1/4.
inline double conical_lambda(double lambda) {
    require(lambda <= -0.25, ErrorKind::invalid_input, "lambda must not exceed -1/4");
    return std::sqrt(-lambda - 0.25);
}

/// dmu / (dnu domega dphi) = (m / E) |det d pi / d(nu, omega, phi)| by central differences.
inline double map_jacobian(const PositionMaps& maps, double nu, double om, double ph, double mass,
                           double h = 1e-5) {
    std::array<Vec3, 3> d;
    const double x[3] = {nu, om, ph};
    for (int a = 0; a < 3; ++a) {
        double lo[3] = {x[0], x[1], x[2]}, hi[3] = {x[0], x[1], x[2]};
        lo[a] -= h;
        hi[a] += h;
        const Vec3 p = maps.inverse(hi[0], hi[1], hi[2]), q = maps.inverse(lo[0], lo[1], lo[2]);
        for (int k = 0; k < 3; ++k) d[a][k] = (p[k] - q[k]) / (2.0 * h);
    }
    const double det = d[0][0] * (d[1][1] * d[2][2] - d[1][2] * d[2][1]) -
                       d[0][1] * (d[1][0] * d[2][2] - d[1][2] * d[2][0]) +
                       d[0][2] * (d[1][0] * d[2][1] - d[1][1] * d[2][0]);
    return mass / energy(maps.inverse(nu, om, ph), mass) * std::abs(det);
}

/// ln(sinh(pi L) |Gamma(1/2 + mu + i L)|^2) / 2 - ln(m (2 pi)^{3/2}): log of the kernel prefactor A.
inline double log_position_prefactor(int mu, double big_lambda, double mass) {
    const double x = pi * big_lambda;
    const double log_sinh = x + std::log1p(-std::exp(-2.0 * x)) - std::log(2.0);
    const double lg = specfun::log_gamma(complex(0.5 + mu, big_lambda)).real();
    return 0.5 * log_sinh + lg - std::log(mass * std::pow(2.0 * pi, 1.5));
}

struct PositionPovmKernel {
    double z = 0.0, lambda = -0.25;
    int m_z = 0;
    double tau = 0.0;
    EnergySign xi = EnergySign::positive;
    double mass = 1.0;
    PositionMaps maps;

    complex operator()(const Vec3& p) const {
        const double big = conical_lambda(lambda);
        require(big > 0.0, ErrorKind::numerical_domain, "kernel vanishes identically at Lambda = 0");
        const auto [nu, om, ph] = maps.forward(p);
        const double sec = 1.0 / std::cos(nu);
        const int mu = std::abs(m_z);
        const double amp = std::exp(log_position_prefactor(mu, big, mass)) * std::pow(sec, -1.5) *
                           specfun::conical_p({mu, big}, std::cosh(om));
        const double phase = mass * tau * std::log(sec) - mass * sign_value(xi) * z * nu + m_z * ph;
        return amp * std::polar(1.0, phase);
    }
};

struct PositionOptions {
    int n_nu = 256;
    int n_omega = 48;
    int n_lambda = 80;
    int m_max = 8;
    double p_max = 8.0;       // momentum radius outside which psi is negligible; sets omega_max
    double lambda_max = 0.0;  // 0: doubled from 16 until the tail is negligible
    double tau = 0.0;
    double max_defect = 5e-2;
};

struct PositionDistribution {
    std::vector<double> z, q;
    double integral = 0.0;  // int q dz on the grid
    double parseval = 0.0;  // the same from the nu-Parseval identity (no z truncation)
    double norm2 = 0.0;     // independent dmu norm of psi
    double defect = 0.0;    // |integral - norm2| / norm2
    double lambda_max = 0.0;
    double lambda_tail = 0.0;      // fraction of parseval in the top tenth of the Lambda range
    double m_tail = 0.0;           // fraction of the angular weight in |m_z| > m_max
    std::vector<double> m_weight;  // per m_z = -m_max..m_max
    std::string maps;
};

/// |z| beyond which the nu phases are undersampled (|m z| dnu > pi/4).
inline double resolved_position(const PositionOptions& o, double mass) {
    return std::abs(o.n_nu) / (4.0 * mass);
}

namespace detail {

/// Midpoint nodes on (-pi/2, pi/2) and Gauss-Legendre nodes on [0, omega_max] and [0, Lambda_max].
struct PositionTransform {
    double mass = 1.0, xi = 1.0, dnu = 0.0;
    int m_max = 0;
    std::vector<double> nu, lambda, lambda_w;  // lambda_w includes d(lambda) = 2 Lambda dLambda
    /// g[mz + m_max][k][i] = G(nu_i, Lambda_k) for populated channels; empty otherwise.
    std::vector<std::vector<std::vector<complex>>> g;
    std::vector<double> m_weight;
    double m_tail = 0.0;
};

/// Azimuthal and Jacobian stage, independent of Lambda:
/// h[mz][i][a] = int dphi J exp(-i mz phi) psi at (nu_i, omega_a).
struct AngularStage {
    std::vector<double> nu, om, wom;
    std::vector<std::vector<std::vector<complex>>> h;
    std::vector<double> m_weight;
    double m_tail = 0.0;
};

inline AngularStage angular_stage(const ops::Field& psi, const PositionMaps& maps, const PositionOptions& o,
                                  double mass) {
    require(o.n_nu >= 8 && o.n_omega >= 4 && o.n_lambda >= 4 && o.m_max >= 0, ErrorKind::invalid_input,
            "position quadrature too small");
    AngularStage st;
    const double dnu = pi / o.n_nu;
    for (int i = 0; i < o.n_nu; ++i) st.nu.push_back(-0.5 * pi + (i + 0.5) * dnu);
    const double om_max = std::asinh(o.p_max / mass);
    const auto glo = specfun::gauss_legendre(o.n_omega);
    for (int a = 0; a < o.n_omega; ++a) {
        st.om.push_back(0.5 * om_max * (glo.nodes[a] + 1.0));
        st.wom.push_back(0.5 * om_max * glo.weights[a]);
    }
    const int n_phi = 4 * (o.m_max + 1);
    const int n_m = 2 * o.m_max + 1;
    std::vector<std::vector<complex>> twiddle(n_m, std::vector<complex>(n_phi));
    for (int c = 0; c < n_m; ++c)
        for (int k = 0; k < n_phi; ++k)
            twiddle[c][k] = std::polar(2.0 * pi / n_phi, -2.0 * pi * (c - o.m_max) * k / n_phi);

    st.h.assign(n_m, std::vector<std::vector<complex>>(o.n_nu, std::vector<complex>(o.n_omega)));
    std::vector<double> all(o.n_nu, 0.0), kept(o.n_nu, 0.0);
    parallel_for(static_cast<std::size_t>(o.n_nu), [&](std::size_t i) {
        std::vector<complex> f(n_phi);
        for (int a = 0; a < o.n_omega; ++a) {
            double sq = 0.0;
            for (int k = 0; k < n_phi; ++k) {
                const double ph = 2.0 * pi * k / n_phi;
                const double jac = map_jacobian(maps, st.nu[i], st.om[a], ph, mass);
                const complex v = psi(maps.inverse(st.nu[i], st.om[a], ph));
                f[k] = jac * v;
                sq += jac * std::norm(v) * 2.0 * pi / n_phi;
            }
            double in = 0.0;
            const double jac0 = map_jacobian(maps, st.nu[i], st.om[a], 0.0, mass);
            for (int c = 0; c < n_m; ++c) {
                complex acc = 0.0;
                for (int k = 0; k < n_phi; ++k) acc += f[k] * twiddle[c][k];
                st.h[c][i][a] = acc;
                // |int dphi J e^{-i mz phi} psi|^2 / (2 pi J) is the channel's share of int dphi J |psi|^2.
                if (jac0 > 0.0) in += std::norm(acc) / (2.0 * pi * jac0);
            }
            all[i] += st.wom[a] * sq;
            kept[i] += st.wom[a] * in;
        }
    });
    const double tot = pairwise_sum(all);
    st.m_tail = tot > 0.0 ? std::max(0.0, 1.0 - pairwise_sum(kept) / tot) : 0.0;
    st.m_weight.assign(n_m, 0.0);
    for (int c = 0; c < n_m; ++c)
        for (int i = 0; i < o.n_nu; ++i)
            for (int a = 0; a < o.n_omega; ++a) st.m_weight[c] += st.wom[a] * std::norm(st.h[c][i][a]);
    return st;
}

inline PositionTransform transform(const AngularStage& st, EnergySign xi, const PositionOptions& o, double mass,
                                   double lambda_max) {
    PositionTransform t;
    t.mass = mass;
    t.xi = sign_value(xi);
    t.m_max = o.m_max;
    t.dnu = pi / o.n_nu;
    t.nu = st.nu;
    t.m_weight = st.m_weight;
    t.m_tail = st.m_tail;
    const auto gll = specfun::gauss_legendre(o.n_lambda);
    for (int k = 0; k < o.n_lambda; ++k) {
        const double l = 0.5 * lambda_max * (gll.nodes[k] + 1.0);
        t.lambda.push_back(l);
        t.lambda_w.push_back(0.5 * lambda_max * gll.weights[k] * 2.0 * l);
    }
    const int n_m = 2 * o.m_max + 1;
    t.g.assign(n_m, {});
    const double wmax = *std::max_element(t.m_weight.begin(), t.m_weight.end());
    // Conical tables per |m_z| with the prefactor A and the omega weights folded in.
    std::vector<std::vector<std::vector<double>>> tables(o.m_max + 1);
    for (int c = 0; c < n_m; ++c) {
        // Channels at rounding level contribute nothing measurable.
        if (t.m_weight[c] <= 1e-20 * wmax || t.m_weight[c] == 0.0) continue;
        const int mu = std::abs(c - o.m_max);
        auto& tab = tables[mu];
        if (tab.empty()) {
            tab.assign(o.n_lambda, std::vector<double>(o.n_omega));
            parallel_for(static_cast<std::size_t>(o.n_lambda), [&](std::size_t k) {
                const double a_pre = std::exp(log_position_prefactor(mu, t.lambda[k], mass));
                for (int a = 0; a < o.n_omega; ++a)
                    tab[k][a] = a_pre * st.wom[a] * specfun::conical_p({mu, t.lambda[k]}, std::cosh(st.om[a]));
            });
        }
        t.g[c].assign(o.n_lambda, std::vector<complex>(o.n_nu));
        parallel_for(static_cast<std::size_t>(o.n_nu), [&](std::size_t i) {
            const double sec = 1.0 / std::cos(t.nu[i]);
            const complex pre = std::pow(sec, -1.5) * std::polar(1.0, -mass * o.tau * std::log(sec));
            for (int k = 0; k < o.n_lambda; ++k) {
                complex acc = 0.0;
                for (int a = 0; a < o.n_omega; ++a) acc += tab[k][a] * st.h[c][i][a];
                t.g[c][k][i] = pre * acc;
            }
        });
    }
    return t;
}

/// (2 pi / m) sum |G|^2 dnu dlambda, split into total and the top tenth of the Lambda range.
inline std::pair<double, double> parseval(const PositionTransform& t) {
    double total = 0.0, tail = 0.0;
    const double lmax = t.lambda.empty() ? 0.0 : t.lambda.back();
    for (const auto& ch : t.g)
        for (std::size_t k = 0; k < ch.size(); ++k) {
            double s = 0.0;
            for (const auto& v : ch[k]) s += std::norm(v);
            const double c = 2.0 * pi / t.mass * t.dnu * t.lambda_w[k] * s;
            total += c;
            if (t.lambda[k] > 0.9 * lmax) tail += c;
        }
    return {total, tail};
}

inline complex overlap_at(const PositionTransform& t, int c, int k, double z) {
    complex acc = 0.0;
    for (std::size_t i = 0; i < t.nu.size(); ++i)
        acc += t.g[c][k][i] * std::polar(t.dnu, t.mass * t.xi * z * t.nu[i]);
    return acc;
}

inline std::vector<double> density(const PositionTransform& t, const std::vector<double>& z) {
    std::vector<double> q(z.size());
    parallel_for(z.size(), [&](std::size_t n) {
        std::vector<double> terms;
        std::vector<complex> ph(t.nu.size());
        for (std::size_t i = 0; i < t.nu.size(); ++i) ph[i] = std::polar(t.dnu, t.mass * t.xi * z[n] * t.nu[i]);
        for (const auto& ch : t.g)
            for (std::size_t k = 0; k < ch.size(); ++k) {
                complex acc = 0.0;
                for (std::size_t i = 0; i < ph.size(); ++i) acc += ch[k][i] * ph[i];
                terms.push_back(t.lambda_w[k] * std::norm(acc));
            }
        q[n] = pairwise_sum(terms);
    });
    return q;
}

inline PositionTransform converged_transform(const ops::Field& psi, EnergySign xi, const PositionMaps& maps,
                                             const PositionOptions& o, double mass, double& lambda_max,
                                             double& tail) {
    const AngularStage st = angular_stage(psi, maps, o, mass);
    lambda_max = o.lambda_max > 0.0 ? o.lambda_max : 16.0;
    for (;;) {
        PositionTransform t = transform(st, xi, o, mass, lambda_max);
        const auto [total, top] = parseval(t);
        tail = total > 0.0 ? top / total : 0.0;
        if (o.lambda_max > 0.0 || tail < 1e-10 || lambda_max >= 256.0) return t;
        lambda_max *= 2.0;
    }
}

}  // namespace detail

/// dmu norm of psi inside |pi| < p_max by a spherical quadrature, independent of the maps.
inline double field_norm2(const ops::Field& psi, double p_max, double mass) {
    return radial_from_function({1e-6, p_max, 1024, mass}, 0, EnergySign::positive, psi).full_norm2;
}

/// <k_{z, lambda, m_z}, psi> by direct quadrature over the map coordinates, kernel evaluated at
/// the mapped momentum. Independent of the factorized transform; O(n_nu n_omega n_phi) conical calls.
inline complex position_overlap(const ops::Field& psi, double z, double lambda, int m_z, double tau, EnergySign xi,
                                const PositionMaps& maps, double mass, const PositionOptions& o = {}) {
    const PositionPovmKernel k{z, lambda, m_z, tau, xi, mass, maps};
    const double om_max = std::asinh(o.p_max / mass);
    const auto glo = specfun::gauss_legendre(o.n_omega);
    const int n_phi = 4 * (o.m_max + 1);
    const double dnu = pi / o.n_nu;
    std::vector<complex> rows(o.n_nu);
    parallel_for(static_cast<std::size_t>(o.n_nu), [&](std::size_t i) {
        const double nu = -0.5 * pi + (i + 0.5) * dnu;
        complex acc = 0.0;
        for (int a = 0; a < o.n_omega; ++a) {
            const double om = 0.5 * om_max * (glo.nodes[a] + 1.0), w = 0.5 * om_max * glo.weights[a];
            for (int j = 0; j < n_phi; ++j) {
                const double ph = 2.0 * pi * j / n_phi;
                const Vec3 p = maps.inverse(nu, om, ph);
                acc += w * (2.0 * pi / n_phi) * map_jacobian(maps, nu, om, ph, mass) * std::conj(k(p)) * psi(p);
            }
        }
        rows[i] = dnu * acc;
    });
    complex s = 0.0;
    for (const auto& r : rows) s += r;
    return s;
}

/// The factorized overlap c(z, lambda, m_z) for every (Lambda node, z); exposed for cross-checks.
struct PositionOverlapTable {
    std::vector<double> lambda;  // Lambda nodes
    std::vector<std::vector<complex>> c;  // c[k][n] at z[n]
};

inline PositionOverlapTable position_overlaps(const ops::Field& psi, EnergySign xi, const PositionMaps& maps,
                                              int m_z, const std::vector<double>& z, double mass,
                                              const PositionOptions& o) {
    require(std::abs(m_z) <= o.m_max, ErrorKind::invalid_order, "m_z outside the truncation");
    require(o.lambda_max > 0.0, ErrorKind::invalid_input, "overlap table needs an explicit lambda_max");
    const auto t = detail::transform(detail::angular_stage(psi, maps, o, mass), xi, o, mass, o.lambda_max);
    PositionOverlapTable out;
    out.lambda = t.lambda;
    const int c = m_z + o.m_max;
    out.c.assign(t.lambda.size(), std::vector<complex>(z.size(), 0.0));
    if (t.g[c].empty()) return out;
    for (std::size_t k = 0; k < t.lambda.size(); ++k)
        for (std::size_t n = 0; n < z.size(); ++n) out.c[k][n] = detail::overlap_at(t, c, static_cast<int>(k), z[n]);
    return out;
}

/// q(z) = sum_{m_z} int dlambda |c|^2. An empty z grid is chosen automatically (step 1/m, grown
/// until it holds all but 1e-8 of the Parseval total). Completeness defect above max_defect is a
/// map-validation failure.
inline PositionDistribution position_distribution(const ops::Field& psi, EnergySign xi, const PositionMaps& maps,
                                                  std::vector<double> z, double mass,
                                                  const PositionOptions& o = {}) {
    require(maps.forward && maps.inverse, ErrorKind::invalid_input, "coordinate maps missing");
    require(mass > 0.0, ErrorKind::invalid_input, "mass must be positive");
    // The inverse must invert the forward map where the kernel is evaluated.
    for (double nu : {-1.2, -0.3, 0.4, 1.1})
        for (double om : {0.1, 0.9, 2.0})
            for (double ph : {0.3, 2.5, 4.0}) {
                const auto back = maps.forward(maps.inverse(nu, om, ph));
                const double dph = std::remainder(back[2] - ph, 2.0 * pi);
                if (std::abs(back[0] - nu) + std::abs(back[1] - om) + std::abs(dph) > 1e-9)
                    fail(ErrorKind::map_validation, "maps '" + maps.name + "': forward does not invert inverse");
            }
    const double limit = resolved_position(o, mass);
    for (double x : z)
        if (std::abs(x) > limit)
            fail(ErrorKind::resolution, "z = " + std::to_string(x) + " exceeds the resolved range " +
                                            std::to_string(limit));
    PositionDistribution d;
    d.maps = maps.name;
    const auto t = detail::converged_transform(psi, xi, maps, o, mass, d.lambda_max, d.lambda_tail);
    d.parseval = detail::parseval(t).first;
    d.m_weight = t.m_weight;
    d.m_tail = t.m_tail;
    d.norm2 = field_norm2(psi, o.p_max, mass);
    require(d.norm2 > 0.0, ErrorKind::numerical_domain, "state has zero norm");
    if (z.empty()) {
        const double h = 1.0 / mass;
        for (double half = std::min(limit, 8.0 / mass);; half = std::min(limit, 2.0 * half)) {
            z.clear();
            for (double x = -std::floor(half / h) * h; x <= half + 1e-12; x += h) z.push_back(x);
            const auto q = detail::density(t, z);
            double s = 0.0;
            for (double v : q) s += h * v;
            if (s >= (1.0 - 1e-8) * d.parseval || half >= limit) {
                d.q = q;
                break;
            }
        }
    } else {
        d.q = detail::density(t, z);
    }
    d.z = z;
    std::vector<double> a;
    for (std::size_t k = 0; k + 1 < z.size(); ++k) a.push_back(0.5 * (z[k + 1] - z[k]) * (d.q[k] + d.q[k + 1]));
    d.integral = pairwise_sum(a);
    d.defect = std::abs(d.integral - d.norm2) / d.norm2;
    if (!(d.defect <= o.max_defect))
        fail(ErrorKind::map_validation, "maps '" + maps.name + "': completeness defect " +
                                            std::to_string(d.defect) + " exceeds " + std::to_string(o.max_defect));
    return d;
}

/// Cartesian states are interpolated onto the map nodes.
inline PositionDistribution position_distribution(const MomentumState& psi, const PositionMaps& maps,
                                                  std::vector<double> z, const PositionOptions& o = {}) {
    require(psi.grid.chart == Chart::momentum, ErrorKind::invalid_chart, "position POVM needs a momentum-chart state");
    PositionOptions opt = o;
    double reach = 0.0;
    for (const auto& a : psi.grid.axes)
        reach = std::max({reach, std::abs(a.origin), std::abs(a.origin + (a.count - 1) * a.step)});
    opt.p_max = std::min(opt.p_max, reach * std::sqrt(3.0));
    return position_distribution(ops::Field([&](const Vec3& q) { return ptloc::detail::interpolate_grid(psi, q); }), psi.xi, maps,
                                 std::move(z), psi.grid.mass, opt);
}

}  // namespace ptloc::povm

#endif

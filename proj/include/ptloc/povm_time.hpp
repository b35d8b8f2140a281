#ifndef PTLOC_POVM_TIME_HPP
#define PTLOC_POVM_TIME_HPP

// Time POVM: kernel overlaps, the detection-time density, its moments, and the kernel-sum
// reconstruction of the Newton-Wigner operator.
//
// In v = ln(r / (E_r + m)) the kernel's t-dependence is the plane wave exp(-i xi m t v) and
// dv = m dr / (r E_r), so c_lm(t) = sqrt(m / 2 pi) int dv F_lm(v) exp(i xi m t v) with
// F_lm = r^{3/2} (r/m)^{-i m tau} psi_lm. Hence int |c|^2 dt = sum_lm int dmu |psi_lm|^2.

#include <optional>

#include "ptloc/operators.hpp"
#include "ptloc/radial.hpp"

namespace ptloc::povm {

inline double time_v(double r, double m) { return std::log(r / (std::sqrt(r * r + m * m) + m)); }

/// sqrt(m/2pi) Y^{l,m_z} r^{-3/2} (r/m)^{i m tau} (r/(E+m))^{-i xi m t}.
struct TimePovmKernel {
    double t = 0.0;
    int l = 0, m_z = 0;
    double tau = 0.0;
    EnergySign xi = EnergySign::positive;
    double mass = 1.0;

    complex operator()(const Vec3& p) const {
        const double r = std::sqrt(norm2(p));
        require(r > 0.0, ErrorKind::numerical_domain, "time kernel is singular at pi = 0");
        const double th = std::acos(std::clamp(p[2] / r, -1.0, 1.0));
        const complex y = specfun::spherical_harmonic(l, m_z, th, std::atan2(p[1], p[0]));
        const double phase = mass * tau * std::log(r / mass) - sign_value(xi) * mass * t * time_v(r, mass);
        return std::sqrt(mass / (2.0 * pi)) * y * std::pow(r, -1.5) * std::polar(1.0, phase);
    }
};

/// Largest spacing of consecutive v nodes.
inline double max_v_step(const RadialGrid& g) {
    double d = 0.0;
    for (int i = 0; i + 1 < g.count; ++i) d = std::max(d, time_v(g.r(i + 1), g.mass) - time_v(g.r(i), g.mass));
    return d;
}

/// |t| beyond which the kernel phase is undersampled (|m t| dv_max > pi/4).
inline double resolved_time(const RadialGrid& g) { return pi / (4.0 * g.mass * max_v_step(g)); }

inline double v_span(const RadialGrid& g) { return time_v(g.r_max, g.mass) - time_v(g.r_min, g.mass); }

/// Uniform t-step at which trapezoid sums of |c|^2 and t|c|^2 are exact: the band of |c|^2 is
/// m * v_span, the step gives a factor-two margin over the aliasing limit.
inline double natural_time_step(const RadialGrid& g) { return pi / (g.mass * v_span(g)); }

inline void check_time_resolution(const RadialGrid& g, double t) {
    const double limit = resolved_time(g);
    if (std::abs(t) > limit)
        fail(ErrorKind::resolution, "time " + std::to_string(t) + " exceeds the resolved range " +
                                        std::to_string(limit) + " of the radial grid");
}

namespace detail {

/// The weighted integrand sqrt(m/2pi) w_i (m/E_i) r_i^{1/2} (r_i/m)^{-i m tau} psi_lm(r_i) for
/// every non-empty channel.
struct PreparedOverlap {
    std::vector<int> lm;
    std::vector<std::vector<complex>> f;
    std::vector<double> v;
    double mass = 1.0;
    double xi = 1.0;
};

inline PreparedOverlap prepare(const RadialState& s, double tau) {
    const RadialGrid& g = s.grid;
    PreparedOverlap p;
    p.mass = g.mass;
    p.xi = sign_value(s.xi);
    p.v.resize(g.count);
    std::vector<complex> w(g.count);
    for (int i = 0; i < g.count; ++i) {
        const double r = g.r(i), e = std::sqrt(r * r + g.mass * g.mass);
        p.v[i] = time_v(r, g.mass);
        w[i] = std::sqrt(g.mass / (2.0 * pi)) * g.weight(i) * g.mass / e * std::sqrt(r) *
               std::polar(1.0, -g.mass * tau * std::log(r / g.mass));
    }
    const double total = std::max(norm2(s), 1e-300);
    for (std::size_t lm = 0; lm < s.channels.size(); ++lm) {
        if (radial_channel_norm2(g, s.channels[lm]) < 1e-30 * total) continue;
        std::vector<complex> f(g.count);
        for (int i = 0; i < g.count; ++i) f[i] = w[i] * s.channels[lm][i];
        p.lm.push_back(static_cast<int>(lm));
        p.f.push_back(std::move(f));
    }
    return p;
}

/// c[k][n] = overlap of prepared channel n at t[k].
inline std::vector<std::vector<complex>> overlaps(const PreparedOverlap& p, const std::vector<double>& t) {
    std::vector<std::vector<complex>> c(t.size(), std::vector<complex>(p.lm.size()));
    parallel_for(t.size(), [&](std::size_t k) {
        const double a = p.xi * p.mass * t[k];
        std::vector<complex> ph(p.v.size());
        for (std::size_t i = 0; i < p.v.size(); ++i) ph[i] = std::polar(1.0, a * p.v[i]);
        for (std::size_t n = 0; n < p.lm.size(); ++n) {
            complex acc = 0.0;
            for (std::size_t i = 0; i < ph.size(); ++i) acc += p.f[n][i] * ph[i];
            c[k][n] = acc;
        }
    });
    return c;
}

inline std::vector<double> density(const PreparedOverlap& p, const std::vector<double>& t) {
    const auto c = overlaps(p, t);
    std::vector<double> out(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
        std::vector<double> a(c[k].size());
        for (std::size_t n = 0; n < a.size(); ++n) a[n] = std::norm(c[k][n]);
        out[k] = pairwise_sum(a);
    }
    return out;
}

inline double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> a;
    for (std::size_t k = 0; k + 1 < x.size(); ++k) a.push_back(0.5 * (x[k + 1] - x[k]) * (y[k] + y[k + 1]));
    return pairwise_sum(a);
}

inline std::vector<double> uniform(double lo, double hi, double step) {
    const int n = std::max(2, static_cast<int>(std::ceil((hi - lo) / step)) + 1);
    std::vector<double> t(n);
    const double h = (hi - lo) / (n - 1);
    for (int k = 0; k < n; ++k) t[k] = lo + k * h;
    return t;
}

}  // namespace detail

/// c_lm(t) for one channel.
inline complex time_overlap(const RadialState& s, double t, int l, int m_z, double tau) {
    require(l >= 0 && l <= s.l_max && std::abs(m_z) <= l, ErrorKind::invalid_order, "channel outside decomposition");
    check_time_resolution(s.grid, t);
    RadialState one = s;
    const int idx = specfun::lm_index(l, m_z);
    for (std::size_t lm = 0; lm < one.channels.size(); ++lm)
        if (static_cast<int>(lm) != idx) std::fill(one.channels[lm].begin(), one.channels[lm].end(), complex(0.0));
    const auto p = detail::prepare(one, tau);
    if (p.lm.empty()) return 0.0;
    return detail::overlaps(p, {t})[0][0];
}

/// c[lm][k] for every channel of the decomposition.
inline std::vector<std::vector<complex>> time_overlaps(const RadialState& s, double tau, const std::vector<double>& t) {
    for (double x : t) check_time_resolution(s.grid, x);
    const auto p = detail::prepare(s, tau);
    const auto c = detail::overlaps(p, t);
    std::vector<std::vector<complex>> out(s.channels.size(), std::vector<complex>(t.size(), 0.0));
    for (std::size_t n = 0; n < p.lm.size(); ++n)
        for (std::size_t k = 0; k < t.size(); ++k) out[p.lm[n]][k] = c[k][n];
    return out;
}

struct TimeDistribution {
    std::vector<double> t, p;
    double integral = 0.0;        // int p dt over the grid
    double retained_norm2 = 0.0;  // sum over kept channels (the exact value of int p dt over R)
    double full_norm2 = 0.0;      // norm of the decomposed state
    double defect = 0.0;          // |integral - full_norm2| / full_norm2
    int l_max = 0;
};

/// p(t) = sum_lm |c_lm(t)|^2 on the given grid. A defect above max_defect is a completeness failure.
inline TimeDistribution time_distribution(const RadialState& s, double tau, const std::vector<double>& t_grid,
                                          double max_defect = 1e-2) {
    require(t_grid.size() >= 2, ErrorKind::invalid_input, "time grid needs at least two points");
    for (std::size_t k = 0; k + 1 < t_grid.size(); ++k)
        require(t_grid[k + 1] > t_grid[k], ErrorKind::invalid_input, "time grid must increase");
    for (double x : t_grid) check_time_resolution(s.grid, x);
    TimeDistribution d;
    d.t = t_grid;
    d.p = detail::density(detail::prepare(s, tau), t_grid);
    d.integral = detail::trapezoid(d.t, d.p);
    d.retained_norm2 = norm2(s);
    d.full_norm2 = s.full_norm2 > 0.0 ? s.full_norm2 : d.retained_norm2;
    d.defect = std::abs(d.integral - d.full_norm2) / d.full_norm2;
    d.l_max = s.l_max;
    if (!(d.defect <= max_defect))
        fail(ErrorKind::completeness_failure, "time-POVM normalization defect " + std::to_string(d.defect) +
                                                  " exceeds " + std::to_string(max_defect));
    return d;
}

struct TimeMoments {
    double mean = 0.0, sigma = 0.0;
    double captured = 0.0;  // fraction of the retained norm inside [lo, hi]
    double lo = 0.0, hi = 0.0, step = 0.0;
    bool heavy_tail = false;
};

namespace detail {

inline TimeMoments moments(const std::vector<double>& t, const std::vector<double>& p, double total) {
    TimeMoments m;
    const double mass = trapezoid(t, p);
    std::vector<double> tp(t.size()), t2p(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) tp[k] = t[k] * p[k];
    m.mean = trapezoid(t, tp) / mass;
    for (std::size_t k = 0; k < t.size(); ++k) t2p[k] = (t[k] - m.mean) * (t[k] - m.mean) * p[k];
    m.sigma = std::sqrt(std::max(0.0, trapezoid(t, t2p) / mass));
    m.captured = mass / total;
    m.lo = t.front();
    m.hi = t.back();
    return m;
}

}  // namespace detail

/// Mean and spread of p(t) on a window grown until it holds `coverage` of the retained norm.
/// When the resolved range is exhausted first, the partial moments come back flagged heavy_tail.
inline TimeMoments time_uncertainty(const RadialState& s, double tau, double coverage = 1.0 - 1e-4,
                                    double step = 0.0) {
    const RadialGrid& g = s.grid;
    const double h = step > 0.0 ? step : natural_time_step(g);
    const double limit = resolved_time(g);
    const auto prep = detail::prepare(s, tau);
    const double total = norm2(s);
    require(total > 0.0, ErrorKind::numerical_domain, "state has no retained norm");
    double centre = 0.0, half = std::min(limit, 16.0 * h);
    for (;;) {
        const double lo = std::max(-limit, centre - half), hi = std::min(limit, centre + half);
        const auto t = detail::uniform(lo, hi, h);
        TimeMoments m = detail::moments(t, detail::density(prep, t), total);
        m.step = t[1] - t[0];
        if (m.captured >= coverage) return m;
        if (lo <= -limit && hi >= limit) {
            m.heavy_tail = true;
            return m;
        }
        centre = std::clamp(m.mean, -limit, limit);
        half *= 2.0;
    }
}

/// A grid covering the bulk of p(t): a coarse pass over the resolved range locates the mass,
/// the window is the larger of mean +- 6 sigma and the 1 - 1e-10 mass interval.
inline std::vector<double> auto_time_grid(const RadialState& s, double tau, double refine = 2.0) {
    const RadialGrid& g = s.grid;
    const double limit = resolved_time(g), h = natural_time_step(g);
    const auto prep = detail::prepare(s, tau);
    const auto t = detail::uniform(-limit, limit, h);
    const auto p = detail::density(prep, t);
    const TimeMoments m = detail::moments(t, p, 1.0);
    const double total = pairwise_sum(p);
    double acc = 0.0;
    std::size_t a = 0, b = t.size() - 1;
    while (a < b && acc + p[a] < 0.5e-10 * total) acc += p[a++];
    acc = 0.0;
    while (b > a && acc + p[b] < 0.5e-10 * total) acc += p[b--];
    const double lo = std::max(-limit, std::min(m.mean - 6.0 * m.sigma, t[a] - h));
    const double hi = std::min(limit, std::max(m.mean + 6.0 * m.sigma, t[b] + h));
    return detail::uniform(lo, hi, h / refine);
}

/// <k_t1, k_t2> for kernels of one (l, m_z) channel regularized by exp(eps v / 2), on the grid.
/// Analytically (m/2pi) int dv exp((eps + i xi m (t1 - t2)) v) over the grid's v range.
inline complex regularized_kernel_overlap(const RadialGrid& g, double t1, double t2, double eps,
                                          EnergySign xi = EnergySign::positive) {
    check_radial_grid(g);
    const double m = g.mass, alpha = sign_value(xi) * m * (t1 - t2);
    std::vector<complex> terms(g.count);
    for (int i = 0; i < g.count; ++i) {
        const double r = g.r(i), e = std::sqrt(r * r + m * m), v = time_v(r, m);
        // (m/E) r^2 dr |r^{-3/2}|^2 = (m / (r E)) dr = dv
        terms[i] = m / (2.0 * pi) * g.weight(i) * m / (r * e) * std::exp(eps * v) * std::polar(1.0, alpha * v);
    }
    complex acc = 0.0;
    for (const auto& x : terms) acc += x;
    return acc;
}

// ---------------------------------------------------------------------------------------------
// Kernel-sum form of the Newton-Wigner operator:
//   X_NW(t) = Q^j(0) - sum_lm int dt' t' g : |k_{t'+t}><k_{t'+t}|,  g = pi^j / E.
// With M_T = int_{|s-t|<T} ds (s - t) |k_s><k_s| the residual is
//   || (X_NW(t) - Q^j(0)) psi + (g M_T psi + M_T (g psi)) / 2 || / ||psi||,
// which vanishes as L_max, T -> infinity because M_inf = Q^0(0) - t.

struct KernelSumResult {
    double residual = 0.0;
    int l_max = 0;
    double half_range = 0.0, step = 0.0;
    /// sum_m int ds |c_lm(s)|^2 of psi and g psi, per l.
    std::vector<double> l_weight;
};

inline KernelSumResult kernel_sum_reconstruction(const RadialGrid& g, const ops::Field& f, EnergySign xi, int j, double t,
                                      int l_max, double half_range, double step = 0.0, int angular_order = 0) {
    require(j >= 1 && j <= 3, ErrorKind::invalid_input, "spatial index must be 1..3");
    require(half_range > 0.0, ErrorKind::invalid_input, "t' range must be positive");
    check_time_resolution(g, std::abs(t) + half_range);
    const double m = g.mass, sx = sign_value(xi);
    const int order = std::max(angular_order, default_angular_order(l_max + 1));
    const ops::Field vel = [=](const Vec3& p) { return complex(p[j - 1] / energy(p, m)); };
    const ops::Field gf = [=](const Vec3& p) { return vel(p) * f(p); };
    const RadialState rp = radial_from_function(g, l_max, xi, f, order);
    const RadialState rg = radial_from_function(g, l_max, xi, gf, order);
    require(rp.full_norm2 > 0.0, ErrorKind::numerical_domain, "state has zero norm");

    KernelSumResult out;
    out.l_max = l_max;
    out.half_range = half_range;
    out.step = step > 0.0 ? step : 0.5 * natural_time_step(g);
    const auto s = detail::uniform(t - half_range, t + half_range, out.step);
    const double ds = s[1] - s[0];
    out.step = ds;
    out.l_weight.assign(l_max + 1, 0.0);

    // (M_T phi)_lm(r_i) = sqrt(m/2pi) r_i^{-3/2} int ds (s - t) exp(-i xi m s v_i) c_lm(s).
    std::vector<double> v(g.count);
    for (int i = 0; i < g.count; ++i) v[i] = time_v(g.r(i), m);
    auto apply_m = [&](const RadialState& st) {
        const auto prep = detail::prepare(st, 0.0);
        const auto c = detail::overlaps(prep, s);
        std::vector<std::vector<complex>> res(st.channels.size(), std::vector<complex>(g.count, 0.0));
        for (std::size_t n = 0; n < prep.lm.size(); ++n) {
            double w = 0.0;
            for (std::size_t k = 0; k < s.size(); ++k) w += ds * std::norm(c[k][n]);
            int l = 0;
            while ((l + 1) * (l + 1) <= prep.lm[n]) ++l;
            out.l_weight[l] += w;
        }
        parallel_for(static_cast<std::size_t>(g.count), [&](std::size_t i) {
            const double r = g.r(static_cast<int>(i));
            const double pre = std::sqrt(m / (2.0 * pi)) * std::pow(r, -1.5);
            std::vector<complex> ph(s.size());
            for (std::size_t k = 0; k < s.size(); ++k) {
                const double wk = (k == 0 || k + 1 == s.size()) ? 0.5 * ds : ds;
                ph[k] = wk * (s[k] - t) * std::polar(1.0, -sx * m * s[k] * v[i]);
            }
            for (std::size_t n = 0; n < prep.lm.size(); ++n) {
                complex acc = 0.0;
                for (std::size_t k = 0; k < s.size(); ++k) acc += ph[k] * c[k][n];
                res[prep.lm[n]][i] = pre * acc;
            }
        });
        return res;
    };
    const auto mp = apply_m(rp);
    const auto mg = apply_m(rg);

    const ops::Field exact =
        ops::apply_to_function(ops::newton_wigner(j, t, xi, m) - ops::q_phys(j, 0.0, xi, m), f, 1e-3);
    const AngularRule rule = angular_rule(order);
    std::vector<std::vector<complex>> y(rule.size());
    std::vector<Vec3> dir(rule.size());
    std::vector<double> wang(rule.size());
    for (std::size_t a = 0; a < rule.theta.size(); ++a)
        for (int k = 0; k < rule.n_phi; ++k) {
            const std::size_t idx = a * rule.n_phi + k;
            const double th = rule.theta[a], ph = rule.phi(k);
            y[idx] = specfun::spherical_harmonics(l_max, th, ph);
            dir[idx] = {std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
            wang[idx] = rule.weight[a];
        }
    std::vector<double> terms(g.count);
    parallel_for(static_cast<std::size_t>(g.count), [&](std::size_t i) {
        const double r = g.r(static_cast<int>(i)), e = std::sqrt(r * r + m * m);
        double sq = 0.0;
        for (std::size_t a = 0; a < dir.size(); ++a) {
            const Vec3 p{r * dir[a][0], r * dir[a][1], r * dir[a][2]};
            complex mpsi = 0.0, mgpsi = 0.0;
            for (std::size_t lm = 0; lm < y[a].size(); ++lm) {
                mpsi += mp[lm][i] * y[a][lm];
                mgpsi += mg[lm][i] * y[a][lm];
            }
            const complex d = exact(p) + 0.5 * (vel(p) * mpsi + mgpsi);
            sq += wang[a] * std::norm(d);
        }
        terms[i] = g.weight(static_cast<int>(i)) * m / e * r * r * sq;
    });
    out.residual = std::sqrt(pairwise_sum(terms) / rp.full_norm2);
    return out;
}

}  // namespace ptloc::povm

#endif

#include <gtest/gtest.h>

#include "ptloc/classical.hpp"
#include "ptloc/operators.hpp"

using namespace ptloc;
using namespace ptloc::ops;

namespace {

constexpr EnergySign pos = EnergySign::positive;
constexpr EnergySign neg = EnergySign::negative;

const Grid3& grid48() {
    static const Grid3 g = cartesian_grid(48, 5.0);
    return g;
}

// Wide grid whose Gaussians are periodic to rounding. Spectral derivatives of products with
// E-dependent coefficients are still limited by the branch points at |pi| = i m, which put
// ~exp(-m pi / h) of the spectrum at the Nyquist edge (a few 1e-6 here).
const Grid3& wide() {
    static const Grid3 g = cartesian_grid(64, 8.0);
    return g;
}

constexpr auto spectral = DerivativeScheme::spectral;

MomentumState wide_gauss(EnergySign xi = pos) {
    return gaussian_state(wide(), {{0.3, -0.2, 0.4}, 0.6, {0.5, 0.0, -0.3}}, xi);
}

MomentumState gauss(EnergySign xi = pos, Vec3 c = {0.3, -0.2, 0.4}, double w = 0.6, Vec3 x = {0.5, 0.0, -0.3}) {
    return gaussian_state(grid48(), {c, w, x}, xi);
}

MomentumState minus(MomentumState a, const MomentumState& b) {
    for (std::size_t i = 0; i < a.amp.size(); ++i) a.amp[i] -= b.amp[i];
    return a;
}

double rel(const MomentumState& a, const MomentumState& b, const MomentumState& ref) {
    return norm(minus(a, b)) / norm(ref);
}

MomentumState multiply(const MomentumState& psi, const std::function<complex(const Vec3&)>& f) {
    MomentumState r = psi;
    for (std::size_t i = 0; i < r.amp.size(); ++i) r.amp[i] *= f(psi.grid.node(i));
    return r;
}

}  // namespace

TEST(ActingRules, Q0MatchesSymbolicExpansion) {
    // psi = exp(-|pi|^2): grad psi = -2 pi psi, so pi.grad psi = -2 |pi|^2 psi.
    const auto f = [](const Vec3& p) { return complex(std::exp(-norm2(p))); };
    const auto psi = sample_state(wide(), pos, f);
    const auto coarse = sample_state(cartesian_grid(32, 5.0), pos, f);
    const auto fine = sample_state(cartesian_grid(64, 5.0), pos, f);
    for (EnergySign xi : {pos, neg}) {
        MomentumState s = psi;
        s.xi = xi;
        const double tau = 0.7;
        const double x = sign_value(xi);
        const auto exact = multiply(s, [&](const Vec3& p) {
            const double e = energy(p, 1.0);
            return x * e * (complex(0.0, -2.0 * norm2(p) + 1.5) + tau);
        });
        EXPECT_LT(rel(apply(q0_phys(tau, xi, 1.0), s, spectral), exact, s), 1e-10);
        // 8th-order differences: halving the step cuts the error by about 2^8.
        auto fd_error = [&](MomentumState g) {
            g.xi = xi;
            const auto ex = multiply(g, [&](const Vec3& p) {
                return x * energy(p, 1.0) * (complex(0.0, -2.0 * norm2(p) + 1.5) + tau);
            });
            return rel(apply(q0_phys(tau, xi, 1.0), g), ex, g);
        };
        const double ec = fd_error(coarse), ef = fd_error(fine);
        EXPECT_LT(ef, 1e-5);
        EXPECT_GT(ec / ef, 100.0);
    }
}

TEST(ActingRules, QjMatchesSymbolicExpansion) {
    const auto psi = sample_state(wide(), pos, [](const Vec3& p) { return complex(std::exp(-norm2(p))); });
    const double tau = -0.4;
    for (int j = 1; j <= 3; ++j) {
        const int a = j - 1;
        const auto exact = multiply(psi, [&](const Vec3& p) {
            // i(-2 pi^j - 2 pi^j |pi|^2 + 1.5 pi^j) + pi^j tau.
            return complex(p[a] * tau, -2.0 * p[a] - 2.0 * p[a] * norm2(p) + 1.5 * p[a]);
        });
        EXPECT_LT(rel(apply(q_phys(j, tau, pos, 1.0), psi, DerivativeScheme::spectral), exact, psi), 1e-10);
    }
}

TEST(ActingRules, ProperTimeEntersLinearly) {
    const auto psi = gauss();
    for (EnergySign xi : {pos, neg}) {
        MomentumState s = psi;
        s.xi = xi;
        const auto d = minus(apply(q0_phys(1.3, xi, 1.0), s), apply(q0_phys(0.0, xi, 1.0), s));
        const auto expect = multiply(s, [&](const Vec3& p) { return complex(sign_value(xi) * energy(p, 1.0) * 1.3); });
        EXPECT_LT(rel(d, expect, s), 1e-13);
        const auto dj = minus(apply(q_phys(2, 1.3, xi, 1.0), s), apply(q_phys(2, 0.0, xi, 1.0), s));
        const auto ej = multiply(s, [&](const Vec3& p) { return complex(sign_value(xi) * p[1] * 1.3); });
        EXPECT_LT(rel(dj, ej, s), 1e-13);
    }
}

TEST(ActingRules, Q0IsSymmetricOnRealStates) {
    // With dmu = m d^3pi / E the (E/m) prefactor cancels and (i/m)(pi.grad + 3/2) is symmetric:
    // the imaginary part of <psi|Q0 psi> equals the measured defect and both vanish.
    const auto psi = sample_state(wide(), pos, [](const Vec3& p) { return complex(std::exp(-norm2(p))); });
    const auto n = normalized(psi);
    const auto q = q0_phys(0.0, pos, 1.0);
    const auto qpsi = apply(q, n, spectral);
    const complex forward = inner_product(n, qpsi);
    const complex backward = inner_product(qpsi, n);
    const complex defect = backward - forward;
    EXPECT_NEAR(std::abs(defect - complex(0.0, -2.0 * forward.imag())), 0.0, 1e-14);
    EXPECT_LT(std::abs(forward.imag()), 1e-10);
}

TEST(ActingRules, QjMomentumCommutatorCoefficient) {
    const auto c = commutator(q_phys(1, 0.2, neg, 1.3), momentum(2, neg, 1.3));
    EXPECT_TRUE(c.multiplicative());
    for (const Vec3& p : {Vec3{0.3, -0.5, 0.1}, Vec3{1.2, 0.4, -0.9}}) {
        const complex expect(0.0, -1.0 * (p[0] * p[1] / (1.3 * 1.3)));
        EXPECT_NEAR(std::abs(c.scalar(p) - expect), 0.0, 1e-10);
    }
    const auto d = commutator(q_phys(3, 0.0, pos, 1.0), momentum(3, pos, 1.0));
    const Vec3 p{0.2, 0.1, 0.7};
    EXPECT_NEAR(std::abs(d.scalar(p) - complex(0.0, 1.0 + 0.49)), 0.0, 1e-10);
}

TEST(NewtonWigner, ComponentsCommute) {
    for (EnergySign xi : {pos, neg}) {
        const auto s = wide_gauss(xi);
        const auto x1 = newton_wigner(1, 0.5, xi, 1.0);
        const auto x2 = newton_wigner(2, 0.5, xi, 1.0);
        const auto direct = minus(apply(x1, apply(x2, s, spectral), spectral), apply(x2, apply(x1, s, spectral), spectral));
        EXPECT_LT(norm(direct) / norm(s), 1e-4);
        EXPECT_LT(norm(apply(commutator(x1, x2), s)) / norm(s), 1e-10);
    }
}

TEST(NewtonWigner, CanonicalWithMomentum) {
    for (EnergySign xi : {pos, neg})
        for (int j = 1; j <= 3; ++j)
            for (int k = 1; k <= 3; ++k) {
                const auto s = wide_gauss(xi);
                const auto c = apply(commutator(newton_wigner(j, 0.3, xi, 1.0), momentum(k, xi, 1.0)), s);
                const complex expect = j == k ? complex(0.0, sign_value(xi)) : complex(0.0);
                const auto e = multiply(s, [&](const Vec3&) { return expect; });
                EXPECT_LT(rel(c, e, s), 1e-8);
                // Both orderings applied directly.
                const auto xp = apply(newton_wigner(j, 0.3, xi, 1.0), apply(momentum(k, xi, 1.0), s), spectral);
                const auto px = apply(momentum(k, xi, 1.0), apply(newton_wigner(j, 0.3, xi, 1.0), s, spectral));
                EXPECT_LT(rel(minus(xp, px), e, s), 1e-4);
            }
}

TEST(NewtonWigner, ExpectationLinearInTime) {
    const auto psi = wide_gauss();
    for (int j = 1; j <= 3; ++j) {
        const double v = expect_multiplier(psi, [j](const Vec3& p) { return complex(p[j - 1] / energy(p, 1.0)); }).real();
        const complex a = expectation(newton_wigner(j, 0.0, pos, 1.0), psi, spectral);
        const complex b = expectation(newton_wigner(j, 2.0, pos, 1.0), psi, spectral);
        EXPECT_NEAR((b - a).real() / 2.0, v, 1e-12);
        EXPECT_NEAR(std::abs((b - a).imag()), 0.0, 1e-12);
        // Self-adjoint: real expectation.
        EXPECT_LT(std::abs(a.imag()), 1e-10);
    }
    // The Gaussian carries exp(-i pi.x0): NW position centre is x0.
    EXPECT_NEAR(expectation(newton_wigner(1, 0.0, pos, 1.0), psi, spectral).real(), 0.5, 1e-10);
}

TEST(SymProduct, TrivialCases) {
    const auto psi = gauss();
    const auto d = q0_phys(0.4, pos, 1.0);
    const auto c = sym_product(complex(2.5) * identity(pos), d);
    EXPECT_LT(relative_difference(c, complex(2.5) * d, psi), 1e-14);
    const auto g = velocity(2, pos, 1.0);
    EXPECT_LT(relative_difference(sym_product(g, identity(pos)), g, psi), 1e-14);
    try {
        sym_product(d, d);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_composition);
    }
}

TEST(SymProduct, ReproducesNewtonWignerCorrection) {
    // Q^j - g:Q^0 with g = pi^j/E is xi i (d_j - pi^j / (2 E^2)).
    for (EnergySign xi : {pos, neg}) {
        MomentumState s = gauss();
        s.xi = xi;
        for (int j = 1; j <= 3; ++j) {
            const auto lhs = q_phys(j, 0.0, xi, 1.0) - sym_product(velocity(j, xi, 1.0), q0_phys(0.0, xi, 1.0));
            const Vec3 p{0.4, -0.7, 1.1};
            const double e = energy(p, 1.0);
            EXPECT_NEAR(std::abs(lhs.scalar(p) - complex(0.0, -sign_value(xi) * p[j - 1] / (2 * e * e))), 0.0, 1e-11);
            EXPECT_LT(relative_difference(lhs, newton_wigner(j, 0.0, xi, 1.0), s), 1e-10);
        }
    }
}

TEST(Decomposition, ResidualSmallAndTimeIndependent) {
    const auto psi = gauss();
    for (int j = 1; j <= 3; ++j) {
        const double r0 = nw_decomposition_residual(psi, j, 0.0);
        const double r1 = nw_decomposition_residual(psi, j, 3.0);
        EXPECT_LT(r0, 1e-8);
        EXPECT_LT(r1, 1e-8);
    }
}

TEST(Decomposition, OtherOrderingsLeaveAnticommutatorTerm) {
    for (EnergySign xi : {pos, neg}) {
        MomentumState psi = gauss();
        psi.xi = xi;
        for (int j = 1; j <= 3; ++j) {
            const auto term = multiply(psi, [&](const Vec3& p) {
                const double e = energy(p, 1.0);
                return complex(0.0, sign_value(xi) * p[j - 1] / (2 * e * e));
            });
            const double expect = norm(term) / norm(psi);
            EXPECT_NEAR(nw_decomposition_residual(psi, j, 0.5, Ordering::left) / expect, 1.0, 1e-6);
            EXPECT_NEAR(nw_decomposition_residual(psi, j, 0.5, Ordering::right) / expect, 1.0, 1e-6);
        }
    }
}

TEST(Tabulated, MatchesClosureApplication) {
    const auto op = nw_from_four_position(2, 0.5, neg, 1.0);
    const auto t = tabulate(op, grid48());
    const auto psi = gauss(neg);
    EXPECT_LT(norm(minus(apply(t, psi), apply(op, psi))), 1e-14 * norm(psi));
    try {
        apply(t, gauss(pos));
        ADD_FAILURE() << "sign mismatch accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::incompatible_state);
    }
    try {
        apply(t, gaussian_state(wide(), {{0.0, 0.0, 0.0}, 0.6, {}}, neg));
        ADD_FAILURE() << "grid mismatch accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::incompatible_state);
    }
}

TEST(Restriction, PropertyTwoAtOperatorLevel) {
    const auto psi = gauss();
    EXPECT_NEAR(std::abs(expectation(restricted_q0_instantaneous(2.5, pos), psi) - 2.5), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(expectation(restricted_q3_fixed_z(-1.5, pos), psi) + 1.5), 0.0, 1e-12);
    EXPECT_LT(variance(restricted_q0_instantaneous(2.5, pos), psi), 1e-12);
}

TEST(Expectation, TrivialValuesAndChartCheck) {
    const auto psi = gaussian_state(grid48(), {{0, 0, 0}, 0.6, {}});
    EXPECT_NEAR(expectation(identity(pos), psi).real(), 1.0, 1e-12);
    for (int k = 1; k <= 3; ++k) EXPECT_NEAR(std::abs(expectation(momentum(k, pos, 1.0), psi)), 0.0, 1e-14);
    EXPECT_GT(variance(newton_wigner(1, 0.0, pos, 1.0), psi), 0.0);
    try {
        expectation(identity(pos, Chart::s_chart), psi);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_chart);
    }
}

TEST(Commutator, ClosureMatchesDirectApplication) {
    const auto psi = wide_gauss();
    const FirstOrderOperator ops[] = {q0_phys(0.3, pos, 1.0), q_phys(1, 0.0, pos, 1.0), q_phys(3, 0.2, pos, 1.0),
                                      newton_wigner(2, 0.1, pos, 1.0), momentum(0, pos, 1.0)};
    for (const auto& a : ops)
        for (const auto& b : ops) {
            const auto direct = minus(apply(a, apply(b, psi, DerivativeScheme::spectral), DerivativeScheme::spectral),
                                      apply(b, apply(a, psi, DerivativeScheme::spectral), DerivativeScheme::spectral));
            const auto closed = apply(commutator(a, b), psi, DerivativeScheme::spectral);
            EXPECT_LT(rel(direct, closed, psi), 1e-3) << a.label << " " << b.label;
        }
}

// ---------------------------------------------------------------------------------------------
// Kijowski operators

namespace {

struct Packet {
    Vec3 center{0.0, 0.0, 2.0};
    double width = 0.1;
    complex operator()(const Vec3& p) const {
        const Vec3 d{p[0] - center[0], p[1] - center[1], p[2] - center[2]};
        return std::polar(std::exp(-norm2(d) / (4 * width * width)), 0.8 * p[2]);
    }
};

struct KijowskiSetup {
    MomentumState pi_state;
    MomentumState s_state;
};

KijowskiSetup kijowski_setup(const Packet& pk, int n = 64, int ns = 256) {
    const Grid3 g = cartesian_grid(n, 7 * pk.width, 1.0, true, pk.center);
    const auto psi = normalized(sample_state(g, pos, pk));
    const Axis s_axis = s_axis_for(g, ns);
    const double c = 1.0 / norm(sample_state(g, pos, pk));
    auto scaled = [&](const Vec3& p) { return c * pk(p); };
    return {psi, s_chart_from_function(s_chart_grid(g, s_axis), scaled)};
}

}  // namespace

TEST(Kijowski, ChartChangeIsIsometry) {
    const Packet pk;
    const auto k = kijowski_setup(pk);
    EXPECT_NEAR(norm(k.s_state), 1.0, 1e-6);
    const auto interp = to_s_chart(k.pi_state, s_axis_for(k.pi_state.grid, 256));
    EXPECT_NEAR(norm(interp), 1.0, 1e-6);
}

TEST(Kijowski, ChartsAgreeAtZeroPlane) {
    for (double c3 : {2.0, 1.5, 3.0}) {
        Packet pk;
        pk.center = {0.1, -0.05, c3};
        pk.width = 0.05 * c3;
        const auto k = kijowski_setup(pk);
        const complex ts = expectation(kijowski_time(0.0, pos, 1.0), k.s_state);
        const complex tp = expectation(kijowski_time_pi(0.0, pos, 1.0), k.pi_state);
        EXPECT_NEAR(std::abs(ts - tp), 0.0, 1e-5) << c3;
        for (int j = 1; j <= 2; ++j) {
            const complex ys = expectation(kijowski_transverse(j, 0.0, pos, 1.0), k.s_state);
            const complex yp = expectation(kijowski_transverse_pi(j, 0.0, pos, 1.0), k.pi_state);
            EXPECT_NEAR(std::abs(ys - yp), 0.0, 1e-5) << c3 << " " << j;
        }
    }
}

TEST(Kijowski, ArrivalSlopeMatchesClassicalOracle) {
    Packet pk;
    pk.width = 0.05 * pk.center[2];
    const auto k = kijowski_setup(pk);
    const complex t0 = expectation(kijowski_time(0.0, pos, 1.0), k.s_state);
    const complex t1 = expectation(kijowski_time(2.0, pos, 1.0), k.s_state);
    const double slope = (t1 - t0).real() / 2.0;
    const double quad = expect_multiplier(k.pi_state, [](const Vec3& p) { return complex(energy(p, 1.0) / p[2]); }).real();
    EXPECT_NEAR(slope, quad, 1e-8 * quad);
    classical::PhasePoint s{{0, 0, 0, 0}, {energy(pk.center, 1.0), pk.center[0], pk.center[1], pk.center[2]}, 1.0};
    const double classical_slope = classical::arrival_time(s, 1.0) - classical::arrival_time(s, 0.0);
    EXPECT_LT(std::abs(slope - classical_slope) / classical_slope, 1e-2);
    EXPECT_GT(variance(kijowski_time(1.0, pos, 1.0), k.s_state), 0.0);
}

TEST(Kijowski, TransverseCommutesWithTime) {
    const auto k = kijowski_setup(Packet{{0.1, 0.05, 2.0}, 0.1});
    for (int j = 1; j <= 2; ++j) {
        const auto c = commutator(kijowski_time(0.7, pos, 1.0), kijowski_transverse(j, 0.7, pos, 1.0));
        EXPECT_LT(norm(apply(c, k.s_state)) / norm(k.s_state), 1e-6);
        const auto cp = commutator(kijowski_time_pi(0.7, pos, 1.0), kijowski_transverse_pi(j, 0.7, pos, 1.0));
        EXPECT_LT(norm(apply(cp, k.pi_state)) / norm(k.pi_state), 1e-6);
    }
}

TEST(Kijowski, TransverseZTerm) {
    const auto k = kijowski_setup(Packet{{0.2, -0.1, 2.0}, 0.1});
    for (int j = 1; j <= 2; ++j) {
        const complex a = expectation(kijowski_transverse(j, 0.0, pos, 1.0), k.s_state);
        const complex b = expectation(kijowski_transverse(j, 1.5, pos, 1.0), k.s_state);
        const double ratio =
            expect_multiplier(k.pi_state, [j](const Vec3& p) { return complex(p[j - 1] / p[2]); }).real();
        EXPECT_NEAR((b - a).real(), 1.5 * ratio, 1e-8);
    }
}

TEST(Kijowski, SingleSidedSupportDropsSign) {
    const auto k = kijowski_setup(Packet{});
    FirstOrderOperator plain = kijowski_time(0.0, pos, 1.0);
    plain.deriv[2] = constant(complex(0.0, -1.0));
    EXPECT_LT(relative_difference(plain, kijowski_time(0.0, pos, 1.0), k.s_state), 1e-15);
}

TEST(Kijowski, RefusesStatesNearSingularPlane) {
    const Grid3 g = cartesian_grid(32, 2.0, 1.0, true);
    const auto psi = gaussian_state(g, {{0, 0, 0}, 0.3, {}});
    try {
        expectation(kijowski_time_pi(0.0, pos, 1.0), psi);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::singular_domain);
    }
    try {
        kijowski_time(0.0, neg, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_chart);
    }
}

TEST(Kijowski, NonSelfAdjointBoundaryDefect) {
    auto phi = [](double s) { return std::polar(std::exp(-0.5 * (s * s - 1.0)), 0.3 * s); };
    auto psi = [](double s) { return complex(std::exp(-(s - 0.5) * (s - 0.5)), 0.2 * s); };
    const auto two = kijowski_boundary_defect(phi, psi, 1.0, 8.0, 4001);
    EXPECT_GT(std::abs(two.measured), 0.1);
    EXPECT_NEAR(std::abs(two.measured - two.boundary_term), 0.0, 1e-8);
    // States vanishing at |s| = m (single-sided support away from the shell edge) have no defect.
    auto bump = [](double s) { return s > 1.5 ? complex(std::exp(-4.0 * (s - 3.0) * (s - 3.0)) * (s - 1.5) * (s - 1.5)) : 0.0; };
    const auto one = kijowski_boundary_defect(bump, bump, 1.0, 8.0, 4001);
    EXPECT_LT(std::abs(one.measured), 1e-8);
}

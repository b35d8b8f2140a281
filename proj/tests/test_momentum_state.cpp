#include <gtest/gtest.h>

#include "ptloc/momentum_state.hpp"
#include "ptloc/specfun.hpp"

using namespace ptloc;

namespace {

Grid3 small_grid(int n = 32, double pmax = 4.5) { return cartesian_grid(n, pmax); }

// Tensor Gauss-Legendre quadrature of f over the cube [-L, L]^3 (an oracle independent of the grid).
complex cube_quadrature(double L, int per_panel, int panels, const std::function<complex(const Vec3&)>& f) {
    const auto gl = specfun::gauss_legendre(per_panel);
    std::vector<double> x, w;
    const double width = 2 * L / panels;
    for (int p = 0; p < panels; ++p)
        for (int i = 0; i < per_panel; ++i) {
            x.push_back(-L + width * (p + 0.5 * (gl.nodes[i] + 1)));
            w.push_back(0.5 * width * gl.weights[i]);
        }
    complex acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j)
            for (std::size_t k = 0; k < x.size(); ++k) acc += w[i] * w[j] * w[k] * f({x[i], x[j], x[k]});
    return acc;
}

}  // namespace

TEST(Grid, CartesianLayout) {
    const Grid3 g = cartesian_grid(16, 2.0);
    EXPECT_DOUBLE_EQ(g.axes[0].step, 0.25);
    EXPECT_DOUBLE_EQ(g.axes[2].origin, -2.0);
    const Grid3 s = cartesian_grid(16, 2.0, 1.0, true);
    EXPECT_DOUBLE_EQ(s.axes[2].origin, -1.875);
    for (int k = 0; k < 16; ++k) EXPECT_NE(s.axes[2].at(k), 0.0);
    EXPECT_THROW(cartesian_grid(4, 1.0), Error);
    const auto idx = g.index(3, 5, 7);
    EXPECT_EQ(g.unflatten(idx), (std::array<int, 3>{3, 5, 7}));
}

TEST(MomentumState, GaussianIsNormalized) {
    const auto psi = gaussian_state(small_grid(), {{0.3, -0.2, 0.1}, 0.5, {}});
    EXPECT_NEAR(norm(psi), 1.0, 1e-12);
}

TEST(MomentumState, HermitianSymmetry) {
    const Grid3 g = small_grid();
    const auto a = gaussian_state(g, {{0.3, 0, 0}, 0.5, {0.5, 0, 0}});
    const auto b = gaussian_state(g, {{-0.2, 0.1, 0}, 0.6, {0, -1, 0}});
    EXPECT_NEAR(std::abs(inner_product(a, b) - std::conj(inner_product(b, a))), 0.0, 1e-15);
}

TEST(MomentumState, InnerProductMatchesRefinedQuadrature) {
    const Grid3 g = small_grid(32, 4.5);
    const GaussianSpec sa{{0.3, 0, 0}, 0.5, {0.4, 0, 0}};
    const GaussianSpec sb{{-0.2, 0.1, 0.05}, 0.6, {0, -0.3, 0}};
    const auto a = gaussian_state(g, sa);
    const auto b = gaussian_state(g, sb);
    auto raw = [](const GaussianSpec& s) {
        return [s](const Vec3& p) {
            const Vec3 d{p[0] - s.center[0], p[1] - s.center[1], p[2] - s.center[2]};
            return std::polar(std::exp(-norm2(d) / (4 * s.width * s.width)),
                              -(p[0] * s.position[0] + p[1] * s.position[1] + p[2] * s.position[2]));
        };
    };
    const auto fa = raw(sa), fb = raw(sb);
    const double L = 4.5;
    auto meas = [](const Vec3& p) { return 1.0 / energy(p, 1.0); };
    const complex ab = cube_quadrature(L, 16, 12, [&](const Vec3& p) { return meas(p) * std::conj(fa(p)) * fb(p); });
    const double aa = cube_quadrature(L, 16, 12, [&](const Vec3& p) { return meas(p) * std::norm(fa(p)); }).real();
    const double bb = cube_quadrature(L, 16, 12, [&](const Vec3& p) { return meas(p) * std::norm(fb(p)); }).real();
    const complex oracle = ab / std::sqrt(aa * bb);
    EXPECT_LT(std::abs(inner_product(a, b) - oracle) / std::abs(oracle), 1e-6);
}

TEST(MomentumState, IncompatibleStates) {
    const auto a = gaussian_state(small_grid(32), {{0, 0, 0}, 0.5, {}});
    const auto b = gaussian_state(small_grid(16, 4.5), {{0, 0, 0}, 0.5, {}});
    const auto c = gaussian_state(small_grid(32), {{0, 0, 0}, 0.5, {}}, EnergySign::negative);
    for (const auto* other : {&b, &c}) {
        try {
            inner_product(a, *other);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::incompatible_state);
        }
    }
}

TEST(MomentumState, GaussianCenterAndParity) {
    const auto sym = gaussian_state(small_grid(), {{0, 0, 0}, 0.5, {}});
    for (int j = 0; j < 3; ++j)
        EXPECT_NEAR(std::abs(expect_multiplier(sym, [j](const Vec3& p) { return complex(p[j]); })), 0.0, 1e-14);
    for (double sigma : {0.2, 0.1, 0.05}) {
        const Grid3 g = cartesian_grid(48, 6 * sigma + 0.5, 1.0, false);
        const auto psi = gaussian_state(g, {{0.5, 0, 0}, sigma, {}});
        const double mean = expect_multiplier(psi, [](const Vec3& p) { return complex(p[0]); }).real();
        EXPECT_LT(std::abs(mean - 0.5), 5 * sigma * sigma);
    }
}

TEST(MomentumState, GaussianClippedByGrid) {
    try {
        gaussian_state(cartesian_grid(16, 1.0), {{0.5, 0, 0}, 0.2, {}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
    }
}

TEST(NewtonWignerTransform, Parseval) {
    const auto psi = gaussian_state(small_grid(), {{0.4, 0, -0.2}, 0.5, {0.5, 0, 0}});
    for (double t : {0.0, 1.0, 3.0}) EXPECT_NEAR(field_norm2(nw_transform(psi, t)), 1.0, 1e-4);
}

TEST(NewtonWignerTransform, FftMatchesDirectSum) {
    const auto psi = gaussian_state(small_grid(16, 4.5), {{0.4, 0, -0.2}, 0.6, {0.5, 0, 0}});
    const auto f = nw_transform(psi, 0.7);
    for (std::size_t idx : {std::size_t{0}, std::size_t{1234}, f.grid.index(8, 8, 8), f.grid.index(3, 9, 12)}) {
        const complex direct = nw_amplitude(psi, f.grid.node(idx), 0.7);
        EXPECT_NEAR(std::abs(f.amp[idx] - direct), 0.0, 1e-13);
    }
}

TEST(NewtonWignerTransform, RoundTrip) {
    const Grid3 g = small_grid(32, 8.0);
    const auto prof = sample_profile(g, [](const Vec3& x) {
        return std::polar(std::exp(-0.5 * norm2(x)), 0.3 * x[0]) * std::pow(pi, -0.75);
    });
    EXPECT_NEAR(field_norm2(prof), 1.0, 1e-12);
    const auto psi = nw_state_from_profile(prof, g, 0.5);
    EXPECT_NEAR(norm(psi), 1.0, 1e-10);
    const auto back = nw_transform(psi, 0.5);
    double worst = 0.0;
    for (std::size_t i = 0; i < back.amp.size(); ++i) worst = std::max(worst, std::abs(back.amp[i] - prof.amp[i]));
    EXPECT_LT(worst, 1e-6);
}

TEST(NewtonWignerTransform, AliasingIsResolutionError) {
    const Grid3 g = small_grid(16, 2.0);
    // A narrow spike carries most of its spectrum out to the momentum-grid edge.
    const auto prof = sample_profile(g, [](const Vec3& x) { return std::exp(-20.0 * norm2(x)); });
    try {
        nw_state_from_profile(prof, g, 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::resolution);
    }
}

TEST(NewtonWignerTransform, CentroidDriftsWithMeanVelocity) {
    const auto psi = gaussian_state(small_grid(32, 4.5), {{0.6, 0, 0}, 0.5, {}});
    auto centroid = [](const PositionField& f) {
        std::vector<double> t(f.amp.size());
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = f.grid.node(i)[0] * std::norm(f.amp[i]);
        return pairwise_sum(t) * f.grid.cell_volume();
    };
    const double drift = centroid(nw_transform(psi, 1.0)) - centroid(nw_transform(psi, 0.0));
    const double v = expect_multiplier(psi, [](const Vec3& p) { return complex(p[0] / energy(p, 1.0)); }).real();
    EXPECT_NEAR(drift, v, 1e-6);
}

TEST(NewtonWignerTransform, SignEntersOnlyThroughPhase) {
    const Grid3 g = small_grid(16, 4.5);
    const GaussianSpec s{{0.2, 0, 0}, 0.6, {}};
    const auto a = nw_transform(gaussian_state(g, s, EnergySign::positive), 0.0);
    const auto b = nw_transform(gaussian_state(g, s, EnergySign::negative), 0.0);
    EXPECT_EQ(a.amp, b.amp);
    const auto c = nw_transform(gaussian_state(g, s, EnergySign::positive), 1.0);
    const auto d = nw_transform(gaussian_state(g, s, EnergySign::negative), -1.0);
    for (std::size_t i = 0; i < c.amp.size(); ++i) EXPECT_NEAR(std::abs(c.amp[i] - d.amp[i]), 0.0, 1e-14);
}

TEST(NewtonWignerTransform, KernelGramIsIdentity1D) {
    // Kernels (2 pi)^{-1/2} sqrt(E/m) exp(-i p x) at dual-grid positions, Gram matrix under
    // dmu = m dp / E. The sqrt(E/m) weights cancel the measure, leaving a plain Fourier sum.
    const int n = 128;
    const double pmax = 8.0, h = 2 * pmax / n, m = 1.0;
    const double dx = 2 * pi / (n * h);
    double worst_off = 0.0, worst_diag = 0.0;
    for (int a : {0, 5, 64, 100})
        for (int b = 0; b < n; ++b) {
            const double xa = -0.5 * n * dx + a * dx, xb = -0.5 * n * dx + b * dx;
            complex acc = 0.0;
            for (int k = 0; k < n; ++k) {
                const double p = -pmax + k * h;
                const double e = std::sqrt(p * p + m * m);
                const complex ka = std::sqrt(e / m) * std::polar(1.0, -p * xa) / std::sqrt(2 * pi);
                const complex kb = std::sqrt(e / m) * std::polar(1.0, -p * xb) / std::sqrt(2 * pi);
                acc += h * (m / e) * std::conj(ka) * kb;
            }
            acc *= dx;
            if (a == b)
                worst_diag = std::max(worst_diag, std::abs(acc - 1.0));
            else
                worst_off = std::max(worst_off, std::abs(acc));
        }
    EXPECT_LT(worst_off, 1e-3);
    EXPECT_LT(worst_diag, 1e-3);
}

TEST(NewtonWignerTransform, TailDecayDiagnostic) {
    const Grid3 g = small_grid(32, 4.5);
    const auto gauss = sample_profile(g, [](const Vec3& x) { return std::exp(-0.5 * norm2(x)); });
    const auto expo = sample_profile(g, [](const Vec3& x) { return std::exp(-0.5 * std::sqrt(norm2(x))); });
    EXPECT_GT(nw_tail_decay(gauss), nw_tail_decay(expo));
    EXPECT_GT(nw_tail_decay(expo), 0.0);
}

TEST(RadialTransform, ParsevalAndRoundTrip) {
    const RadialLine line{4096, 0.01, 1.0};
    RadialProfile prof{line, std::vector<complex>(line.size())};
    for (int i = 0; i < line.size(); ++i) {
        const double r = line.r(i);
        prof.u[i] = r * std::exp(-r * r);
    }
    const double n0 = radial_norm2(prof);
    const auto psi = radial_state_from_profile(prof);
    const auto back = radial_nw_profile(psi, 0.0);
    EXPECT_NEAR(radial_norm2(back) / n0, 1.0, 1e-12);
    double worst = 0.0;
    for (int i = 0; i < line.size(); ++i) worst = std::max(worst, std::abs(back.u[i] - prof.u[i]));
    EXPECT_LT(worst, 1e-12);
    EXPECT_NEAR(radial_norm2(radial_nw_profile(psi, 2.0)) / n0, 1.0, 1e-12);
}

TEST(RadialTransform, AgreesWithCartesianTransform) {
    // The s-wave NW profile of a radial state must match the 3D transform at the same radius.
    const Grid3 g = small_grid(64, 6.0);
    const auto psi3 = gaussian_state(g, {{0, 0, 0}, 0.7, {}});
    const double dx = dual_position_grid(g).axes[0].step;
    const RadialLine line{8192, dx / 100, 1.0};
    RadialMomentum rm{line, std::vector<complex>(line.size())};
    // g(p) = p sqrt(m/E) psi(p) with psi the same Gaussian (unnormalized then matched).
    for (int k = 0; k < line.size(); ++k) {
        const double p = line.p(k);
        rm.g[k] = p * std::sqrt(1.0 / std::sqrt(p * p + 1.0)) * std::exp(-p * p / (4 * 0.49));
    }
    const auto prof = radial_nw_profile(rm, 0.8);
    const auto f = nw_transform(psi3, 0.8);
    const std::size_t i0 = f.grid.index(32, 32, 35);
    const double r0 = std::sqrt(norm2(f.grid.node(i0)));
    const std::size_t i1 = f.grid.index(32, 32, 37);
    const double r1 = std::sqrt(norm2(f.grid.node(i1)));
    auto radial_at = [&](double r) {
        const int i = static_cast<int>(std::lround(r / line.dr)) - 1;
        return prof.u[i] / line.r(i);
    };
    // Ratios remove the normalization: phi(r1)/phi(r0) must agree.
    const complex ratio3 = f.amp[i1] / f.amp[i0];
    const complex ratio1 = radial_at(r1) / radial_at(r0);
    EXPECT_NEAR(std::abs(ratio3 - ratio1), 0.0, 1e-8);
}

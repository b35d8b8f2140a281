#include <gtest/gtest.h>

#include "ptloc/specfun.hpp"

using namespace ptloc;
using namespace ptloc::specfun;

TEST(GaussLegendre, IntegratesPolynomialsExactly) {
    for (int n : {1, 2, 5, 20, 41}) {
        const auto q = gauss_legendre(n);
        for (int deg = 0; deg <= 2 * n - 1; ++deg) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += q.weights[i] * std::pow(q.nodes[i], deg);
            const double exact = (deg % 2) ? 0.0 : 2.0 / (deg + 1);
            EXPECT_NEAR(s, exact, 1e-13) << n << " " << deg;
        }
    }
}

TEST(LogGamma, TrivialValues) {
    EXPECT_NEAR(std::abs(log_gamma(1.0)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(log_gamma(2.0)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(log_gamma(0.5) - std::log(std::sqrt(pi))), 0.0, 1e-14);
}

TEST(LogGamma, ReflectionModulusOracle) {
    for (double y : {0.5, 2.0, 10.0}) {
        const double lhs = std::exp(2.0 * log_gamma(complex(0.5, y)).real());
        const double rhs = pi / std::cosh(pi * y);
        EXPECT_NEAR(lhs / rhs, 1.0, 1e-10) << y;
    }
}

TEST(LogGamma, MatchesArbitraryPrecisionValues) {
    // Reference values from mpmath.loggamma at 30 digits.
    const std::pair<complex, complex> ref[] = {
        {{3.5, 2.0}, {0.58073321208126816934, 2.3353168419161627716}},
        {{10.0, -7.0}, {10.418194968645705788, -16.311795218824036624}},
        {{0.5, 40.0}, {-61.912914538591192027, 107.55621986920906124}},
        {{0.25, 0.5}, {0.3402504204084197874, -1.1951830098875903012}},
        {{-2.5, 1.0}, {-2.3441906524655925559, -8.3041279866579258844}},
    };
    for (const auto& [z, v] : ref) EXPECT_LT(std::abs(log_gamma(z) - v) / std::abs(v), 1e-12) << z;
}

TEST(LogGamma, RecurrenceAcrossStrip) {
    for (double re = 0.5; re <= 49.0; re += 3.7)
        for (double im = -50.0; im <= 50.0; im += 9.1) {
            const complex z(re, im);
            const complex d = log_gamma(z + 1.0) - log_gamma(z) - std::log(z);
            EXPECT_LT(std::abs(d), 1e-12 * std::max(1.0, std::abs(log_gamma(z)))) << z;
        }
}

TEST(LogGamma, PoleIsError) {
    for (double z : {0.0, -1.0, -7.0}) {
        try {
            log_gamma(z);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::pole);
        }
    }
}

TEST(SphericalHarmonics, Y00IsConstant) {
    for (double th : {0.0, 0.3, 1.7, pi})
        EXPECT_NEAR(std::abs(spherical_harmonic(0, 0, th, 0.4) - 1.0 / std::sqrt(4.0 * pi)), 0.0, 1e-15);
}

TEST(SphericalHarmonics, ClosedFormLowOrders) {
    const double th = 0.9, ph = 1.3;
    EXPECT_NEAR(std::abs(spherical_harmonic(1, 0, th, ph) - std::sqrt(3.0 / (4 * pi)) * std::cos(th)), 0.0, 1e-15);
    const complex y11 = -std::sqrt(3.0 / (8 * pi)) * std::sin(th) * std::polar(1.0, ph);
    EXPECT_NEAR(std::abs(spherical_harmonic(1, 1, th, ph) - y11), 0.0, 1e-15);
    const complex y22 = 0.25 * std::sqrt(15.0 / (2 * pi)) * std::pow(std::sin(th), 2) * std::polar(1.0, 2 * ph);
    EXPECT_NEAR(std::abs(spherical_harmonic(2, 2, th, ph) - y22), 0.0, 1e-15);
}

TEST(SphericalHarmonics, OrthonormalUpToL8) {
    const int lmax = 8;
    const auto gl = gauss_legendre(24);
    const int nphi = 32;
    const int n = lm_count(lmax);
    std::vector<complex> gram(n * n, 0.0);
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double th = std::acos(gl.nodes[i]);
        for (int k = 0; k < nphi; ++k) {
            const auto y = spherical_harmonics(lmax, th, 2 * pi * k / nphi);
            const double w = gl.weights[i] * 2 * pi / nphi;
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) gram[a * n + b] += w * std::conj(y[a]) * y[b];
        }
    }
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) EXPECT_NEAR(std::abs(gram[a * n + b] - (a == b ? 1.0 : 0.0)), 0.0, 1e-10);
}

TEST(SphericalHarmonics, ConjugationAndAddition) {
    const double th = 2.1, ph = -0.7;
    const auto y = spherical_harmonics(8, th, ph);
    for (int l = 0; l <= 8; ++l) {
        double sum = 0.0;
        for (int m = -l; m <= l; ++m) {
            sum += std::norm(y[lm_index(l, m)]);
            const double sg = (m % 2) ? -1.0 : 1.0;
            EXPECT_NEAR(std::abs(y[lm_index(l, -m)] - sg * std::conj(y[lm_index(l, m)])), 0.0, 1e-15);
        }
        EXPECT_NEAR(sum, (2 * l + 1) / (4 * pi), 1e-10);
    }
}

TEST(SphericalHarmonics, InvalidOrder) {
    try {
        spherical_harmonic(2, 3, 0.1, 0.1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_order);
    }
}

TEST(Conical, ValuesAtOne) {
    for (double lam : {0.0, 1.0, 7.5}) {
        EXPECT_DOUBLE_EQ(conical_p({0, lam}, 1.0), 1.0);
        for (int mu : {1, 2, 5}) EXPECT_DOUBLE_EQ(conical_p({mu, lam}, 1.0), 0.0);
    }
}

TEST(Conical, MatchesArbitraryPrecisionValues) {
    // mpmath.legenp(-1/2 + i Lambda, -mu, x, type=3) at 30 digits.
    struct Ref {
        int mu;
        double lambda, x, value;
    };
    const Ref ref[] = {
        {0, 1.0, 2.0, 0.55641354893507601368},   {0, 0.5, 1.2, 0.95291560481135443846},
        {1, 2.0, 1.3, 0.26197182622361954328},   {2, 3.0, 1.4, 0.043904432241177291869},
        {0, 5.0, 3.0, -0.031247941029570748484}, {1, 10.0, 10.0, -0.0063080848399890046225},
        {3, 0.7, 50.0, 0.030873891048660295699}, {0, 20.0, 2.5, 0.07580568548062499073},
    };
    for (const auto& r : ref) EXPECT_NEAR(conical_p({r.mu, r.lambda}, r.x), r.value, 1e-10) << r.mu << " " << r.x;
}

TEST(Conical, DualPathAgreementOnOverlap) {
    // Overlap window: both paths are well conditioned for x in [1.05, 1.5], Lambda <= 4.
    double worst = 0.0;
    for (int mu = 0; mu <= 4; ++mu)
        for (double lam = 0.0; lam <= 4.0; lam += 0.5)
            for (double x = 1.05; x <= 1.5; x += 0.05) {
                const double a = conical_p_series({mu, lam}, x);
                const double b = conical_p_integral({mu, lam}, x);
                worst = std::max(worst, std::abs(a - b));
            }
    EXPECT_LT(worst, 1e-8);
    EXPECT_NEAR(conical_p_series({0, 1.0}, 2.0), conical_p_integral({0, 1.0}, 2.0), 1e-8);
}

TEST(Conical, PositiveNearOne) {
    for (double lam : {0.0, 2.0, 10.0})
        for (double x = 1.0; x < 1.01; x += 0.001) EXPECT_GT(conical_p({0, lam}, x), 0.0);
}

TEST(Conical, RangeAndDomainErrors) {
    try {
        conical_p({0, 1.0}, 2e6);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::range);
    }
    try {
        conical_p({0, 1.0}, 0.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
    }
}

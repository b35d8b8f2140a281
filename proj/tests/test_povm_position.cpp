#include <gtest/gtest.h>

#include "ptloc/povm_position.hpp"

using namespace ptloc;
using namespace ptloc::povm;

namespace {

complex rest_gauss(const Vec3& q) { return std::exp(-norm2(q)); }

complex moving_gauss(const Vec3& q) {
    const Vec3 d{q[0] - 0.3, q[1], q[2] - 0.5};
    return std::exp(-norm2(d) / 1.44) * std::polar(1.0, 1.5 * q[2]);
}

PositionMaps scaled_omega_maps() {
    auto m = hyperbolic_maps(1.0);
    m.name = "scaled-omega";
    auto f = m.forward;
    auto inv = m.inverse;
    m.forward = [f](const Vec3& q) {
        auto a = f(q);
        a[1] *= 1.3;
        return a;
    };
    m.inverse = [inv](double nu, double om, double ph) { return inv(nu, om / 1.3, ph); };
    return m;
}

std::vector<double> zgrid(double lo, double hi) {
    std::vector<double> z;
    for (double x = lo; x <= hi + 1e-12; x += 1.0) z.push_back(x);
    return z;
}

template <class F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::io;
}

}  // namespace

TEST(PositionKernel, LambdaMapping) {
    EXPECT_DOUBLE_EQ(conical_lambda(-0.25), 0.0);
    EXPECT_DOUBLE_EQ(conical_lambda(-4.25), 2.0);
    EXPECT_EQ(kind_of([] { conical_lambda(0.0); }), ErrorKind::invalid_input);
}

TEST(PositionKernel, ModulusIndependentOfZAndTau) {
    const Vec3 p{0.4, -0.2, 0.7};
    const auto maps = hyperbolic_maps(1.0);
    const double ref = std::abs(PositionPovmKernel{0.0, -3.0, 1, 0.0, EnergySign::positive, 1.0, maps}(p));
    EXPECT_GT(ref, 0.0);
    for (double z : {-4.0, 2.5})
        for (double tau : {0.0, 0.8})
            EXPECT_NEAR(std::abs(PositionPovmKernel{z, -3.0, 1, tau, EnergySign::positive, 1.0, maps}(p)), ref, 1e-14);
}

TEST(PositionMaps, HyperbolicJacobian) {
    const auto maps = hyperbolic_maps(1.0);
    for (double nu : {-1.0, 0.2, 1.3})
        for (double om : {0.05, 1.0, 2.2}) {
            const double sec = 1.0 / std::cos(nu);
            EXPECT_NEAR(map_jacobian(maps, nu, om, 0.7, 1.0) / (sec * sec * sec * std::sinh(om)), 1.0, 1e-8);
        }
}

TEST(PositionDistribution, CompleteForHyperbolicMaps) {
    for (auto f : {rest_gauss, moving_gauss}) {
        const auto d = position_distribution(f, EnergySign::positive, hyperbolic_maps(1.0), {}, 1.0);
        EXPECT_LT(d.defect, 1e-6);
        EXPECT_NEAR(d.parseval / d.norm2, 1.0, 1e-6);
        EXPECT_LT(d.lambda_tail, 1e-10);
        for (double q : d.q) EXPECT_GE(q, 0.0);
    }
}

TEST(PositionDistribution, AxialStateOnlyInMzZero) {
    const auto d = position_distribution(rest_gauss, EnergySign::positive, hyperbolic_maps(1.0), zgrid(-4, 4), 1.0,
                                         {.max_defect = 1.0});
    const int m_max = (static_cast<int>(d.m_weight.size()) - 1) / 2;
    for (int c = 0; c < static_cast<int>(d.m_weight.size()); ++c)
        if (c != m_max) {
            EXPECT_LT(d.m_weight[c], 1e-20 * d.m_weight[m_max]) << c - m_max;
        }
}

TEST(PositionDistribution, NuTranslationShiftsDensity) {
    const double a = 3.0;
    const auto maps = hyperbolic_maps(1.0);
    const auto shifted = [&](const Vec3& q) { return moving_gauss(q) * std::polar(1.0, -a * maps.forward(q)[0]); };
    const auto z = zgrid(-20, 20);
    std::vector<double> zs;
    for (double x : z) zs.push_back(x + a);
    const PositionOptions o{.max_defect = 1.0};
    const auto base = position_distribution(moving_gauss, EnergySign::positive, maps, z, 1.0, o);
    const auto moved = position_distribution(shifted, EnergySign::positive, maps, zs, 1.0, o);
    const double peak = *std::max_element(base.q.begin(), base.q.end());
    for (std::size_t k = 0; k < z.size(); ++k) EXPECT_NEAR(moved.q[k], base.q[k], 1e-6 * peak) << z[k];
}

TEST(PositionDistribution, EnergySignMirrorsZ) {
    const auto maps = hyperbolic_maps(1.0);
    const auto z = zgrid(-10, 10);
    const PositionOptions o{.max_defect = 1.0};
    const auto plus = position_distribution(moving_gauss, EnergySign::positive, maps, z, 1.0, o);
    const auto minus = position_distribution(moving_gauss, EnergySign::negative, maps, z, 1.0, o);
    for (std::size_t k = 0; k < z.size(); ++k) EXPECT_NEAR(plus.q[k], minus.q[z.size() - 1 - k], 1e-12);
}

TEST(PositionDistribution, WrongMapsFailValidation) {
    EXPECT_EQ(kind_of([] { position_distribution(rest_gauss, EnergySign::positive, scaled_omega_maps(), {}, 1.0); }),
              ErrorKind::map_validation);
    auto broken = hyperbolic_maps(1.0);
    broken.forward = [](const Vec3& q) { return std::array<double, 3>{q[2], q[0], q[1]}; };
    EXPECT_EQ(kind_of([&] { position_distribution(rest_gauss, EnergySign::positive, broken, {}, 1.0); }),
              ErrorKind::map_validation);
}

TEST(PositionDistribution, DefectReportedForWrongMaps) {
    const auto d = position_distribution(rest_gauss, EnergySign::positive, scaled_omega_maps(), {}, 1.0,
                                         {.max_defect = 10.0});
    EXPECT_GT(d.defect, 5e-2);
}

TEST(PositionDistribution, UnresolvedZIsError) {
    const PositionOptions o{.n_nu = 64};
    EXPECT_EQ(kind_of([&] {
                  position_distribution(rest_gauss, EnergySign::positive, hyperbolic_maps(1.0), {0.0, 17.0}, 1.0, o);
              }),
              ErrorKind::resolution);
}

TEST(PositionDistribution, CartesianState) {
    const auto psi = normalized(gaussian_state(cartesian_grid(48, 5.0, 1.0), {{0.0, 0.2, 0.4}, 0.6, {0, 0, 1.0}}));
    const auto d = position_distribution(psi, hyperbolic_maps(1.0), {});
    EXPECT_NEAR(d.norm2, 1.0, 1e-4);
    EXPECT_NEAR(d.integral, 1.0, 1e-3);
}

TEST(PositionOverlap, FactorizedMatchesDirectQuadrature) {
    PositionOptions o{.n_nu = 48, .n_omega = 24, .n_lambda = 12, .m_max = 2, .p_max = 5.0, .lambda_max = 12.0};
    const auto maps = hyperbolic_maps(1.0);
    const std::vector<double> z{-1.0, 0.0, 2.0};
    for (int mz : {0, 1}) {
        const auto table = position_overlaps(moving_gauss, EnergySign::positive, maps, mz, z, 1.0, o);
        for (int k : {2, 7})
            for (std::size_t n = 0; n < z.size(); ++n) {
                const double lam = -(table.lambda[k] * table.lambda[k] + 0.25);
                const complex direct =
                    position_overlap(moving_gauss, z[n], lam, mz, 0.0, EnergySign::positive, maps, 1.0, o);
                EXPECT_LT(std::abs(table.c[k][n] - direct), 1e-9 * std::max(1.0, std::abs(direct)))
                    << mz << " " << k << " " << z[n];
            }
    }
}

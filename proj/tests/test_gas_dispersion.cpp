#include <gtest/gtest.h>

#include <cmath>

#include "twinbeam/config.hpp"
#include "twinbeam/gas_dispersion.hpp"
#include "twinbeam/rng.hpp"

using namespace twinbeam;

namespace {

GasSpec argon() { return gas_from_config(default_config()); }
FiberGeometry fiber() { return fiber_from_config(default_config()); }

// Frozen from an independent 40-digit evaluation of the same capillary formula
// (symbolic derivatives, root polish), tests/oracles/dispersion_oracle.py.
constexpr double kAreaRadiusUm = 9.713195006230142;
constexpr double kIndex800At75 = 1.019117216233751;
constexpr double kBeta800At75 = 8000234.498005964;
constexpr double kBeta1At75 = 3.402151841633994e-9;
constexpr double kBeta2At75FsCm = -1.824945940596234;
constexpr double kGamma800At75 = 3.780566844486947e-5;
constexpr double kZdw50Nm = 705.9103166241126;
constexpr double kZdw75Nm = 776.4028136284506;
constexpr double kZdw96Nm = 822.6087830862033;

}  // namespace

TEST(Geometry, AreaPreservingRadius) {
    EXPECT_NEAR(fiber().area_preserving_radius() * 1e6, kAreaRadiusUm, 1e-12);
}

TEST(Geometry, EffectiveRadiusShrinksWithWavelength) {
    const auto f = fiber();
    EXPECT_LT(f.effective_radius(1000e-9), f.effective_radius(600e-9));
    EXPECT_LT(f.effective_radius(600e-9), f.area_preserving_radius());
}

TEST(Dispersion, IndexMatchesOracle) {
    const DispersionModel m(argon(), fiber(), 75.0, 293.0);
    EXPECT_NEAR(m.index(800e-9), kIndex800At75, 1e-14);
}

TEST(Dispersion, PropagationConstantMatchesOracle) {
    const DispersionModel m(argon(), fiber(), 75.0, 293.0);
    const double w = wavelength_to_omega(800e-9);
    EXPECT_NEAR(m.beta(w), kBeta800At75, 1e-8 * kBeta800At75);
    EXPECT_NEAR(beta_derivative(m, w, 1), kBeta1At75, 1e-9 * kBeta1At75);
    EXPECT_NEAR(beta2_at_wavelength(m, 800e-9) * 1e30 / 100.0, kBeta2At75FsCm, 1e-4);
}

TEST(Dispersion, GammaMatchesOracle) {
    const DispersionModel m(argon(), fiber(), 75.0, 293.0);
    EXPECT_NEAR(nonlinear_coefficient(m, wavelength_to_omega(800e-9)), kGamma800At75, 1e-12 * kGamma800At75);
}

TEST(Dispersion, ZdwMatchesOracle) {
    for (auto [p, zdw] : {std::pair{50.0, kZdw50Nm}, std::pair{75.0, kZdw75Nm}, std::pair{96.0, kZdw96Nm}}) {
        const DispersionModel m(argon(), fiber(), p, 293.0);
        EXPECT_NEAR(find_zdw(m, 500e-9, 1100e-9) * 1e9, zdw, 0.02) << p << " bar";
    }
}

TEST(Dispersion, VacuumLimitIsPureWaveguide) {
    const DispersionModel m(argon(), fiber(), 0.0, 293.0);
    EXPECT_EQ(m.index(800e-9), 1.0);
    // Empty capillary: only the anomalous waveguide contribution is left.
    EXPECT_LT(beta2_at_wavelength(m, 800e-9), 0.0);
    EXPECT_EQ(m.gamma(wavelength_to_omega(800e-9)), 0.0);
}

TEST(Dispersion, StencilsAgree) {
    const DispersionModel m(argon(), fiber(), 60.0, 293.0);
    const double b3 = beta2_at_wavelength(m, 900e-9, {1e-4, 3});
    const double b5 = beta2_at_wavelength(m, 900e-9, {1e-4, 5});
    EXPECT_NEAR(b3, b5, 1e-3 * std::abs(b5));
}

TEST(Dispersion, ZdwRisesMonotonicallyWithPressure) {
    PhiloxEngine gen(11, 0, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const double p1 = 30.0 + 60.0 * gen.uniform();
        const double p2 = p1 + 0.5 + 10.0 * gen.uniform();
        const DispersionModel a(argon(), fiber(), p1, 293.0), b(argon(), fiber(), p2, 293.0);
        EXPECT_LT(find_zdw(a, 450e-9, 1200e-9), find_zdw(b, 450e-9, 1200e-9)) << p1 << " vs " << p2;
    }
}

TEST(Dispersion, IndexScalesWithDensityProperty) {
    PhiloxEngine gen(12, 0, 0);
    const auto gas = argon();
    for (int trial = 0; trial < 200; ++trial) {
        const double lambda = 450e-9 + 1500e-9 * gen.uniform();
        const double p = 150.0 * gen.uniform();
        const double t = 250.0 + 100.0 * gen.uniform();
        const double n = refractive_index(gas, lambda, p, t);
        const double expected = gas.susceptibility_ref(lambda) * (p / gas.p_ref_bar) * (gas.t_ref_k / t);
        EXPECT_NEAR(n * n - 1.0, expected, 1e-15 + 1e-12 * expected);
        EXPECT_GE(n, 1.0);
    }
}

TEST(Dispersion, GammaLinearInPressure) {
    const double w = wavelength_to_omega(800e-9);
    const DispersionModel a(argon(), fiber(), 20.0, 293.0), b(argon(), fiber(), 60.0, 293.0);
    EXPECT_NEAR(b.gamma(w) / a.gamma(w), 3.0, 1e-14);
}

TEST(Dispersion, OutsideWindowThrows) {
    const DispersionModel m(argon(), fiber(), 75.0, 293.0);
    EXPECT_THROW(m.index(300e-9), DomainError);
    EXPECT_THROW(m.index(2500e-9), DomainError);
    EXPECT_THROW(beta_derivative(m, m.omega_min(), 2), DomainError);
    EXPECT_THROW(propagation_constant(m, m.omega_max() * 1.01), DomainError);
}

TEST(Dispersion, InvalidInputsThrow) {
    EXPECT_THROW(DispersionModel(argon(), fiber(), -1.0), DomainError);
    EXPECT_THROW(DispersionModel(argon(), fiber(), 10.0, 0.0), DomainError);
    auto g = argon();
    g.sellmeier.clear();
    EXPECT_THROW(DispersionModel(g, fiber(), 10.0), DomainError);
    auto f = fiber();
    f.s_parameter = 1.5;
    EXPECT_THROW(DispersionModel(argon(), f, 10.0), DomainError);
    f = fiber();
    f.wall_m = 0.0;
    EXPECT_THROW(DispersionModel(argon(), f, 10.0), DomainError);
}

TEST(Dispersion, ZdwSearchReportsMissingRoot) {
    const DispersionModel m(argon(), fiber(), 75.0, 293.0);
    EXPECT_THROW(find_zdw(m, 900e-9, 1100e-9), DomainError);
}

TEST(PolynomialModel, TaylorSeries) {
    const double w0 = 2.0e15;
    const PolynomialDispersion m(w0, {10.0, 2.0, -4.0, 6.0}, 1e-3);
    const double d = 1e12;
    EXPECT_NEAR(m.beta(w0 + d), 10.0 + 2.0 * d - 2.0 * d * d + d * d * d, 1e-9 * std::abs(m.beta(w0 + d)));
    EXPECT_NEAR(beta_derivative(m, w0, 2, {1e-5, 5}), -4.0, 1e-3);
}

TEST(LossTable, InterpolatesAndClamps) {
    const LossTable t({{1000e-9, 3.0}, {500e-9, 1.0}});
    EXPECT_DOUBLE_EQ(t.db_per_m(750e-9), 2.0);
    EXPECT_DOUBLE_EQ(t.db_per_m(100e-9), 1.0);
    EXPECT_DOUBLE_EQ(t.db_per_m(2000e-9), 3.0);
    EXPECT_EQ(LossTable{}.db_per_m(800e-9), 0.0);
    EXPECT_THROW(LossTable({{500e-9, -1.0}}), DomainError);
}

TEST(Walkoff, AntisymmetricAndZeroOnDiagonal) {
    const DispersionModel m(argon(), fiber(), 75.0, 293.0);
    const double a = thz_to_omega(420.0), b = thz_to_omega(330.0);
    EXPECT_EQ(group_walkoff(m, a, a), 0.0);
    EXPECT_NEAR(group_walkoff(m, a, b), -group_walkoff(m, b, a), 1e-20);
}

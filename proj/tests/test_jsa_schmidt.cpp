#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "twinbeam/config.hpp"
#include "twinbeam/jsa_schmidt.hpp"

using namespace twinbeam;

namespace {

Eigen::MatrixXcd random_matrix(PhiloxEngine& gen, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXcd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = {gen.uniform() - 0.5, gen.uniform() - 0.5};
    }
    return m;
}

// K = (tr rho)^2 / tr(rho^2) with rho = F F^dagger, accumulated by explicit loops.
double purity_oracle(const Eigen::MatrixXcd& f) {
    const auto rows = f.rows(), cols = f.cols();
    std::vector<std::complex<double>> rho(static_cast<std::size_t>(rows * rows));
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index k = 0; k < rows; ++k) {
            std::complex<double> acc = 0.0;
            for (Eigen::Index j = 0; j < cols; ++j) acc += f(i, j) * std::conj(f(k, j));
            rho[static_cast<std::size_t>(i * rows + k)] = acc;
        }
    }
    double trace = 0.0, trace_sq = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
        trace += rho[static_cast<std::size_t>(i * rows + i)].real();
        for (Eigen::Index k = 0; k < rows; ++k) trace_sq += std::norm(rho[static_cast<std::size_t>(i * rows + k)]);
    }
    return trace * trace / trace_sq;
}

DispersionModel argon_at(double p) {
    auto cfg = default_config();
    cfg["conditions"]["pressure_bar"] = p;
    return model_from_config(cfg);
}

}  // namespace

TEST(Schmidt, RankOneIsSingleMode) {
    Eigen::VectorXcd u(5), v(7);
    u << 1, 2, 3, 4, 5;
    v << 1, -1, 0.5, 2, 0, 1, 3;
    const auto s = schmidt_decompose(u * v.transpose());
    EXPECT_NEAR(s.k, 1.0, 1e-12);
    EXPECT_NEAR(s.g2, 2.0, 1e-12);
}

TEST(Schmidt, TwoEqualModes) {
    Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(4, 4);
    f(0, 1) = 3.0;
    f(2, 3) = std::complex<double>(0.0, 3.0);
    const auto s = schmidt_decompose(f);
    EXPECT_NEAR(s.k, 2.0, 1e-12);
    EXPECT_NEAR(s.weights[0], 0.5, 1e-12);
    EXPECT_NEAR(s.g2, 1.5, 1e-12);
}

TEST(Schmidt, MatchesPurityOracleOnRandomMatrices) {
    PhiloxEngine gen(31, 0, 0);
    for (int trial = 0; trial < 5; ++trial) {
        const auto f = random_matrix(gen, 50, 50 - 7 * trial);
        const auto s = schmidt_decompose(f);
        EXPECT_NEAR(s.k, purity_oracle(f), 1e-8) << trial;
        double total = 0.0;
        for (double w : s.weights) total += w;
        EXPECT_NEAR(total, 1.0, 1e-12);
        EXPECT_TRUE(std::is_sorted(s.singular_values.rbegin(), s.singular_values.rend()));
    }
}

TEST(Schmidt, InvariantUnderScaling) {
    PhiloxEngine gen(32, 0, 0);
    const auto f = random_matrix(gen, 20, 30);
    const double k = schmidt_decompose(f).k;
    EXPECT_NEAR(schmidt_decompose(f * 1e-9).k, k, 1e-10 * k);
    EXPECT_NEAR(schmidt_decompose(f * std::complex<double>(0.0, 1e6)).k, k, 1e-10 * k);
}

TEST(Schmidt, G2IdentityProperty) {
    PhiloxEngine gen(33, 0, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = schmidt_decompose(random_matrix(gen, 8 + trial, 12));
        EXPECT_DOUBLE_EQ(s.g2, 1.0 + 1.0 / s.k);
    }
    EXPECT_NEAR(g2_from_k(4.31), 1.232, 5e-4);
    EXPECT_THROW(g2_from_k(0.5), DomainError);
}

TEST(Schmidt, ModesReconstructMatrix) {
    PhiloxEngine gen(34, 0, 0);
    const auto f = random_matrix(gen, 30, 25);
    const auto m = schmidt_modes(f);
    const Eigen::MatrixXcd back = m.signal_modes * m.singular_values.asDiagonal() * m.idler_modes.adjoint();
    EXPECT_LT((back - f).norm() / f.norm(), 1e-8);
}

TEST(Schmidt, RejectsDegenerateInput) {
    EXPECT_THROW(schmidt_decompose(Eigen::MatrixXcd::Zero(3, 3)), DomainError);
    Eigen::MatrixXcd bad = Eigen::MatrixXcd::Ones(2, 2);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(schmidt_decompose(bad), DomainError);
}

TEST(PumpAmplitude, NormalisedGaussian) {
    const PumpSpectralAmplitude e(800e-9, 3.1e-9, 64);
    double norm = 0.0;
    for (double a : e.amplitude()) norm += a * a * e.step();
    EXPECT_NEAR(norm, 1.0, 1e-12);
    const double fwhm = kTwoPi * kSpeedOfLight * 3.1e-9 / (800e-9 * 800e-9);
    const double peak = e(e.center());
    EXPECT_NEAR(e(e.center() + 0.5 * fwhm) / peak, std::sqrt(0.5), 1e-12);
    EXPECT_THROW(PumpSpectralAmplitude(800e-9, 3.1e-9, 16), DomainError);
    EXPECT_THROW(PumpSpectralAmplitude(800e-9, 0.0), DomainError);
}

TEST(Jsa, ShortFibreIsNearlySeparable) {
    // With no phase-matching filter the JSA is the pump envelope along the
    // anti-diagonal on narrow axes, which is close to a product state.
    const auto m = argon_at(76.0);
    const PumpSpectralAmplitude pump(800e-9, 3.1e-9, 64);
    const double w = pump.center();
    const double d = thz_to_omega(70.0), half = thz_to_omega(0.05);
    const JsaAxes axes{linspace(w + d - half, w + d + half, 32), linspace(w - d - half, w - d + half, 32)};
    const auto jsa = build_jsa(pump, m, 1e-9, 1e5, axes);
    EXPECT_NEAR(schmidt_decompose(jsa).k, 1.0, 1e-3);
}

TEST(Jsa, NominalSettingsGiveFewModes) {
    const auto m = argon_at(76.0);
    const double omega_p = wavelength_to_omega(800e-9);
    const double power = 4.2 / (m.gamma(omega_p) * 0.3);
    const PumpSpectralAmplitude pump(800e-9, 3.1e-9, 64);
    const auto axes = default_jsa_axes(m, omega_p, power, 96);
    const auto jsa = build_jsa(pump, m, 0.3, power, axes, 2);
    const auto s = schmidt_decompose(jsa);
    EXPECT_GT(s.k, 1.0);
    EXPECT_LT(s.k, 10.0);
    EXPECT_NEAR(s.k, purity_oracle(jsa.values), 1e-8);
    EXPECT_EQ(jsa.pressure_bar, 76.0);
}

TEST(Jsa, ThreadIndependent) {
    const auto m = argon_at(76.0);
    const double omega_p = wavelength_to_omega(800e-9);
    const PumpSpectralAmplitude pump(800e-9, 3.1e-9, 32);
    const auto axes = default_jsa_axes(m, omega_p, 3e5, 24);
    EXPECT_EQ(build_jsa(pump, m, 0.3, 3e5, axes, 1).values, build_jsa(pump, m, 0.3, 3e5, axes, 4).values);
}

TEST(Jsa, AxesCentredOnSidebands) {
    const auto m = argon_at(76.0);
    const double omega_p = wavelength_to_omega(800e-9);
    const auto axes = default_jsa_axes(m, omega_p, 3e5, 65);
    const auto pm = innermost(solve_sidebands(m, omega_p, 3e5));
    ASSERT_TRUE(pm.has_value());
    EXPECT_NEAR(axes.signal[32], pm->signal_omega, 1e-6 * omega_p);
    EXPECT_NEAR(axes.idler[32], pm->idler_omega, 1e-6 * omega_p);
    EXPECT_GT(axes.signal.front(), omega_p);
}

TEST(Jsa, RejectsAxesOutsideWindow) {
    const auto m = argon_at(76.0);
    const PumpSpectralAmplitude pump(800e-9, 3.1e-9, 32);
    const JsaAxes axes{linspace(thz_to_omega(800.0), thz_to_omega(810.0), 4), linspace(thz_to_omega(300.0), thz_to_omega(310.0), 4)};
    EXPECT_THROW(build_jsa(pump, m, 0.3, 3e5, axes), DomainError);
    EXPECT_THROW(build_jsa(pump, m, 0.3, 3e5, JsaAxes{}), DomainError);
}

TEST(Jsa, CsvLayout) {
    JSAMatrix jsa;
    jsa.signal = {thz_to_omega(400.0), thz_to_omega(401.0)};
    jsa.idler = {thz_to_omega(350.0)};
    jsa.values = Eigen::MatrixXcd::Ones(2, 1);
    std::ostringstream os;
    write_jsi_csv(os, jsa);
    EXPECT_EQ(os.str(), "signal_THz\\idler_THz,350\n400,1\n401,1\n");
}

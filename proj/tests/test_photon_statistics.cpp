#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "twinbeam/photon_statistics.hpp"

using namespace twinbeam;

namespace {

PulseEnsemble counts(std::vector<std::uint32_t> s, std::vector<std::uint32_t> i) {
    PulseEnsemble e;
    e.stage = Stage::lossy;
    e.signal = std::move(s);
    e.idler = std::move(i);
    return e;
}

ModeSet thermal_k(double k, double total) {
    const auto w = weights_for_schmidt_number(k);
    return modes_from_weights(w, total);
}

}  // namespace

TEST(Modes, GeometricWeightsHitSchmidtNumber) {
    PhiloxEngine gen(41, 0, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const double k = 1.0 + 30.0 * gen.uniform();
        const auto w = weights_for_schmidt_number(k);
        double sum = 0.0, sum2 = 0.0;
        for (double x : w) {
            sum += x;
            sum2 += x * x;
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
        EXPECT_NEAR(1.0 / sum2, k, 1e-9 * k);
        EXPECT_TRUE(std::is_sorted(w.rbegin(), w.rend()));
    }
    EXPECT_EQ(weights_for_schmidt_number(1.0)[0], 1.0);
    EXPECT_NEAR(weights_for_schmidt_number(8.0, 8)[7], 0.125, 1e-15);
    EXPECT_THROW(weights_for_schmidt_number(0.9), DomainError);
    EXPECT_THROW(weights_for_schmidt_number(70.0, 64), DomainError);
}

TEST(Modes, SingularValuesToOccupations) {
    const std::vector<double> s{0.5, 1.0, 0.25};
    const auto m = modes_from_singular_values(4.6, s, 2);
    ASSERT_EQ(m.size(), 2u);
    EXPECT_NEAR(m.mean_photons[0], 2474.0, 1.0);
    EXPECT_NEAR(m.mean_photons[1], std::pow(std::sinh(2.3), 2), 1e-9);
    EXPECT_THROW(modes_from_singular_values(1.0, std::vector<double>{}), DomainError);
    EXPECT_THROW(modes_from_singular_values(1.0, std::vector<double>{0.0}), DomainError);
}

TEST(Modes, Validation) {
    ModeSet m;
    EXPECT_THROW(m.validate(), DomainError);
    m.mean_photons = {1.0, -2.0};
    EXPECT_THROW(m.validate(), DomainError);
    m.mean_photons = {1.0, 2.0};
    m.efficiency = {{1.0, 1.0}};
    EXPECT_THROW(m.validate(), DomainError);
    m.efficiency = {{1.0, 1.0}, {1.2, 1.0}};
    EXPECT_THROW(m.validate(), DomainError);
}

TEST(TwinBeam, PerfectlyCorrelatedAndThermal) {
    const ModeSet single{{50.0}, {}};
    const auto e = sample_twin_beam(single, 200000, CounterRng(5));
    EXPECT_EQ(e.signal, e.idler);
    NrfOptions opt;
    opt.bootstrap.resamples = 0;
    EXPECT_EQ(estimate_nrf(e, opt).nrf, 0.0);
    const auto g2 = estimate_g2(e, Channel::signal);
    EXPECT_NEAR(g2.mean, 50.0, 5.0 * 50.0 / std::sqrt(200000.0));
    EXPECT_NEAR(g2.g2, 2.0, 4.0 * g2.std_error);
}

TEST(TwinBeam, ThreadAndSeedBehaviour) {
    const auto modes = thermal_k(4.31, 1000.0);
    const auto a = sample_twin_beam(modes, 5000, CounterRng(7), 1);
    const auto b = sample_twin_beam(modes, 5000, CounterRng(7), 4);
    EXPECT_EQ(a.signal, b.signal);
    EXPECT_NE(a.signal, sample_twin_beam(modes, 5000, CounterRng(8), 1).signal);
    EXPECT_EQ(apply_loss(a, 0.4, 0.5, CounterRng(9), 1).idler, apply_loss(a, 0.4, 0.5, CounterRng(9), 3).idler);
}

TEST(Loss, NrfFollowsOneMinusEtaProperty) {
    PhiloxEngine gen(42, 0, 0);
    const auto source = sample_twin_beam(thermal_k(3.0, 500.0), 100000, CounterRng(10));
    for (int trial = 0; trial < 8; ++trial) {
        const double eta = 0.05 + 0.9 * gen.uniform();
        const auto lossy = apply_loss(source, eta, eta, CounterRng(11).substream(static_cast<std::uint32_t>(trial)));
        const auto r = estimate_nrf(lossy);
        EXPECT_NEAR(r.nrf, 1.0 - eta, 4.0 * r.std_error) << "eta " << eta;
        EXPECT_NEAR(r.mean_total, 2.0 * eta * 500.0, 0.05 * r.mean_total);
    }
}

TEST(Loss, EdgeCases) {
    const auto source = sample_twin_beam(ModeSet{{10.0}, {}}, 1000, CounterRng(12));
    const auto none = apply_loss(source, 1.0, 1.0, CounterRng(13));
    EXPECT_EQ(none.signal, source.signal);
    const auto all = apply_loss(source, 0.0, 0.0, CounterRng(13));
    for (auto n : all.signal) EXPECT_EQ(n, 0u);
    EXPECT_THROW(estimate_nrf(all), DomainError);
    EXPECT_THROW(apply_loss(source, 1.5, 0.5, CounterRng(13)), DomainError);
    const auto det = detect(none, DetectorSpec{}, DetectorSpec{}, CounterRng(14));
    EXPECT_THROW(apply_loss(det, 0.5, 0.5, CounterRng(13)), DomainError);
    EXPECT_THROW(detect(det, DetectorSpec{}, DetectorSpec{}, CounterRng(14)), DomainError);
}

TEST(Loss, SpectralMismatchAddsExcessNoise) {
    ModeSet modes = thermal_k(4.0, 2000.0);
    modes.mean_photons.resize(4);
    modes.efficiency.assign(4, {1.0, 1.0});
    modes.efficiency[0] = {1.0, 0.8};
    const auto source = sample_twin_beam(modes, 50000, CounterRng(15));
    const auto lossy = apply_loss(source, 0.45, 0.45, CounterRng(16));
    EXPECT_GT(estimate_nrf(lossy).nrf, 1.0);
    modes.efficiency.assign(4, {1.0, 1.0});
    const auto matched = apply_loss(sample_twin_beam(modes, 50000, CounterRng(15)), 0.45, 0.45, CounterRng(16));
    const auto r = estimate_nrf(matched);
    EXPECT_NEAR(r.nrf, 0.55, 4.0 * r.std_error);
}

TEST(Nrf, HandComputedValue) {
    // d = {1, -1, 2, 0}: mean 0.5, unbiased variance 5/3; totals mean 4.5.
    const auto e = counts({2, 1, 4, 3}, {1, 2, 2, 3});
    NrfOptions opt;
    opt.bootstrap.resamples = 0;
    const auto r = estimate_nrf(e, opt);
    EXPECT_NEAR(r.variance_difference, 5.0 / 3.0, 1e-15);
    EXPECT_NEAR(r.mean_total, 4.5, 1e-15);
    EXPECT_NEAR(r.nrf, (5.0 / 3.0) / 4.5, 1e-15);
    EXPECT_TRUE(std::isnan(r.std_error));
    EXPECT_THROW(estimate_nrf(counts({1}, {1})), DomainError);
}

TEST(Nrf, BootstrapErrorShrinksWithSampleSize) {
    const auto modes = thermal_k(4.31, 1000.0);
    auto se = [&](std::size_t n) {
        const auto src = sample_twin_beam(modes, n, CounterRng(17));
        return estimate_nrf(apply_loss(src, 0.45, 0.45, CounterRng(18))).std_error;
    };
    const double ratio = se(20000) / se(320000);
    EXPECT_GT(ratio, 2.8);
    EXPECT_LT(ratio, 5.7);
}

TEST(Detection, NoiseInflatesNrfByKnownAmount) {
    const auto source = sample_twin_beam(thermal_k(4.31, 2000.0), 200000, CounterRng(19));
    const auto lossy = apply_loss(source, 0.45, 0.45, CounterRng(20));
    const DetectorSpec ds{0.95, 2.096, 600.0}, di{0.95, 2.178, 650.0};
    const auto det = detect(lossy, ds, di, CounterRng(21));
    const auto shift = compare_nrf(lossy, det);
    const double expected = (600.0 * 600.0 + 650.0 * 650.0) / estimate_nrf(lossy).mean_total;
    EXPECT_NEAR(shift.shift, expected, 4.0 * shift.std_error);
    NrfOptions sub;
    sub.subtract_noise = true;
    const auto corrected = estimate_nrf(det, sub);
    EXPECT_NEAR(corrected.nrf, 0.55, 4.0 * corrected.std_error);
}

TEST(Detection, ReadoutScaling) {
    const auto e = counts({100, 200}, {50, 0});
    const DetectorSpec quiet_s{0.95, 2.0, 0.0}, quiet_i{0.95, 3.0, 0.0};
    const auto d = detect(e, quiet_s, quiet_i, CounterRng(22));
    EXPECT_DOUBLE_EQ(d.signal_readout[1], 400.0);
    EXPECT_DOUBLE_EQ(d.idler_readout[0], 150.0);
    EXPECT_DOUBLE_EQ(d.signal_value(0), 100.0);
    EXPECT_EQ(d.signal_noise_variance(), 0.0);
    EXPECT_THROW(detect(e, DetectorSpec{0.95, 0.0, 1.0}, quiet_i, CounterRng(22)), DomainError);
}

TEST(G2, MixtureMatchesSchmidtNumberProperty) {
    PhiloxEngine gen(43, 0, 0);
    for (int trial = 0; trial < 4; ++trial) {
        const double k = 1.0 + 8.0 * gen.uniform();
        const auto e = sample_twin_beam(thermal_k(k, 3000.0), 200000, CounterRng(23).substream(static_cast<std::uint32_t>(trial)));
        const auto g = estimate_g2(e, Channel::idler);
        EXPECT_NEAR(g.g2, 1.0 + 1.0 / k, 4.0 * g.std_error) << "K " << k;
        EXPECT_FALSE(g.k_unbounded);
    }
}

TEST(G2, CoherentLightIsOne) {
    const auto e = sample_coherent(5000.0, 1.0, 100000, CounterRng(24));
    const auto g = estimate_g2(e, Channel::signal);
    EXPECT_NEAR(g.g2, 1.0, 4.0 * g.std_error);
}

TEST(G2, DetectorNoiseIsRemoved) {
    const auto e = sample_twin_beam(thermal_k(4.31, 20000.0), 100000, CounterRng(25));
    const auto det = detect(e, DetectorSpec{0.95, 2.096, 600.0}, DetectorSpec{0.95, 2.178, 650.0}, CounterRng(26));
    const auto g = estimate_g2(det, Channel::signal);
    EXPECT_NEAR(g.g2, 1.0 + 1.0 / 4.31, 4.0 * g.std_error);
}

TEST(Calibration, CoherentSlopeIsOne) {
    const std::vector<double> ratios{0.9, 1.0, 1.1}, means{2e4, 1e5, 4e5};
    const auto cal = calibrate_shot_noise(ratios, means, 50000, DetectorSpec{0.95, 2.096, 600.0},
                                          DetectorSpec{0.95, 2.178, 650.0}, CounterRng(27));
    EXPECT_NEAR(cal.fit.slope, 1.0, 0.03);
    EXPECT_NEAR(cal.fit.intercept, 600.0 * 600.0 + 650.0 * 650.0, 4.0 * cal.fit.intercept_se);
    // Sample-variance error sqrt(2 / n) (Var + noise), expressed in NRF units.
    for (const auto& pt : cal.points) {
        const double se = std::sqrt(2.0 / 50000.0) * pt.variance / pt.mean_total;
        EXPECT_NEAR(pt.calibrated_nrf, 1.0, 4.0 * se) << pt.mean_total;
    }
    EXPECT_THROW(calibrate_shot_noise({}, means, 10, DetectorSpec{}, DetectorSpec{}, CounterRng(1)), DomainError);
}

TEST(Coherent, SplitRatio) {
    const auto e = sample_coherent(3000.0, 2.0, 20000, CounterRng(28));
    double s = 0.0, i = 0.0;
    for (std::size_t p = 0; p < e.pulses(); ++p) {
        s += e.signal[p];
        i += e.idler[p];
    }
    EXPECT_NEAR(s / i, 2.0, 0.01);
    EXPECT_THROW(sample_coherent(-1.0, 1.0, 10, CounterRng(1)), DomainError);
    EXPECT_THROW(sample_coherent(1.0, 0.0, 10, CounterRng(1)), DomainError);
}

TEST(LossBudget, SymmetricAndAsymmetric) {
    const auto sym = loss_budget({{{"optics", 0.45, 1, BudgetChannel::both}}});
    EXPECT_NEAR(sym.eta_total, 0.45, 1e-15);
    EXPECT_NEAR(sym.nrf_best, 0.55, 1e-15);
    const auto asym = loss_budget({{{"a", 0.9, 2, BudgetChannel::both}, {"b", 0.5, 1, BudgetChannel::signal}}});
    EXPECT_NEAR(asym.eta_signal, 0.405, 1e-15);
    EXPECT_NEAR(asym.eta_idler, 0.81, 1e-15);
    EXPECT_NEAR(asym.eta_total, (0.405 * 0.405 + 0.81 * 0.81) / (0.405 + 0.81), 1e-15);
    const auto best = loss_budget({{{"source", 0.985, 1, BudgetChannel::both}}});
    EXPECT_NEAR(best.nrf_best_db, -18.24, 0.01);
    EXPECT_THROW(loss_budget({}), DomainError);
    EXPECT_THROW(loss_budget({{{"x", 0.0, 1, BudgetChannel::both}}}), DomainError);
    EXPECT_THROW(loss_budget({{{"x", 0.5, 0, BudgetChannel::both}}}), DomainError);
}

TEST(LossBudget, AsymmetricFormulaMatchesSimulation) {
    const auto source = sample_twin_beam(thermal_k(4.0, 1000.0), 200000, CounterRng(29));
    const auto lossy = apply_loss(source, 0.3, 0.7, CounterRng(30));
    const auto r = estimate_nrf(lossy);
    const double eta = loss_budget({{{"s", 0.3, 1, BudgetChannel::signal}, {"i", 0.7, 1, BudgetChannel::idler}}}).eta_total;
    // Pair-number fluctuations add (eta_s - eta_i)^2 Var(N) / <N_s + N_i>, Var(N) = n^2 / K + n.
    const double n = 1000.0;
    const double expected = 1.0 - eta + std::pow(0.3 - 0.7, 2) * (n / 4.0 + 1.0) / (0.3 + 0.7);
    EXPECT_NEAR(r.nrf, expected, 4.0 * r.std_error);
}

TEST(Attenuation, LinearWithCorrectEndpoints) {
    std::vector<double> extra;
    for (int i = 0; i <= 10; ++i) extra.push_back(0.1 * i);
    const auto sweep = attenuation_sweep(0.45, extra, thermal_k(4.31, 2000.0), 100000, CounterRng(31));
    ASSERT_EQ(sweep.points.size(), 11u);
    EXPECT_FALSE(sweep.points.front().valid);
    EXPECT_GT(sweep.fit.r_squared, 0.999);
    EXPECT_NEAR(sweep.fit(0.0), 1.0, 0.01);
    EXPECT_NEAR(sweep.fit(1.0), 0.55, 0.01);
    EXPECT_NEAR(sweep.fit.slope, -0.45, 0.02);
}

TEST(Brightness, CalibratedNrfIsFlat) {
    BrightnessConfig cfg;
    cfg.gains = {3.9, 4.6};
    cfg.singular_values = {1.0, 0.9, 0.7, 0.5};
    cfg.pulses = 50000;
    const auto sweep = brightness_sweep(cfg, CounterRng(32));
    ASSERT_EQ(sweep.points.size(), 2u);
    for (const auto& pt : sweep.points) {
        EXPECT_NEAR(pt.lossy.nrf, 0.55, 4.0 * pt.lossy.std_error);
        EXPECT_NEAR(pt.calibrated.nrf, 0.55, 4.0 * pt.calibrated.std_error);
        EXPECT_GT(pt.detected.nrf, pt.calibrated.nrf);
    }
    EXPECT_GT(sweep.points[0].detected.nrf, sweep.points[1].detected.nrf);
}

TEST(RawDump, RoundTripAndByteOrder) {
    const auto e = counts({1, 0x01020304u}, {0xffffffffu, 7});
    std::ostringstream os;
    write_raw_counts(os, e);
    const std::string bytes = os.str();
    ASSERT_EQ(bytes.size(), 16u);
    EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 0x04);
    EXPECT_EQ(static_cast<unsigned char>(bytes[11]), 0x01);
    const std::vector<unsigned char> raw(bytes.begin(), bytes.end());
    const auto back = read_raw_counts(raw);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0], std::make_pair(1u, 0xffffffffu));
    EXPECT_EQ(back[1], std::make_pair(0x01020304u, 7u));
    EXPECT_THROW(read_raw_counts(std::vector<unsigned char>(5)), DomainError);
}

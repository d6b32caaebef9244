#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "twinbeam/core.hpp"
#include "twinbeam/gas_dispersion.hpp"
#include "twinbeam/numerics.hpp"

namespace twinbeam {

/// Degenerate-pump phase mismatch 2 beta_p - beta_s - beta_i - 2 gamma P at
/// signal detuning Omega (signal at omega_p + Omega, idler at omega_p - Omega).
template <DispersionLike M>
double mismatch_at_detuning(const M& model, double omega_p, double detuning, double power_w) {
    const double ws = omega_p + detuning;
    const double wi = omega_p - detuning;
    if (!model.contains(ws) || !model.contains(wi) || !model.contains(omega_p)) {
        throw DomainError("phase matching: detuning " + describe(omega_to_thz(detuning)) +
                          " THz puts a wave outside the dispersion window");
    }
    return 2.0 * model.beta(omega_p) - (model.beta(ws) + model.beta(wi)) - 2.0 * model.gamma(omega_p) * power_w;
}

/// Mismatch for an explicit signal frequency; the idler is 2 omega_p - omega_s.
template <DispersionLike M>
double mismatch(const M& model, double omega_s, double omega_p, double power_w) {
    return mismatch_at_detuning(model, omega_p, omega_s - omega_p, power_w);
}

struct PhaseMatchPoint {
    double signal_omega = 0.0;  // blue sideband, > pump
    double idler_omega = 0.0;   // red sideband
    double pump_omega = 0.0;
    double power_w = 0.0;
    double residual = 0.0;      // rad/m

    double detuning() const { return signal_omega - pump_omega; }
    double separation() const { return signal_omega - idler_omega; }
};

struct SidebandSearch {
    double guard = thz_to_omega(5.0);  // roots closer than this to the pump are discarded
    double max_detuning = 0.0;         // 0: as far as the dispersion window allows
    int scan_points = 2000;
};

namespace detail {

template <class M>
double window_limited_detuning(const M& model, double omega_p, double requested) {
    double limit = requested > 0.0 ? requested : std::numeric_limits<double>::infinity();
    if constexpr (requires { model.omega_min(); model.omega_max(); }) {
        limit = std::min({limit, model.omega_max() - omega_p, omega_p - model.omega_min()});
    }
    if (!std::isfinite(limit)) throw DomainError("sideband search needs a finite max_detuning for this model");
    return limit;
}

}  // namespace detail

/// All phase-matched sideband pairs in (guard, max_detuning], found by a sign
/// scan followed by bisection. An empty result means no phase matching.
template <DispersionLike M>
std::vector<PhaseMatchPoint> solve_sidebands(const M& model, double omega_p, double power_w, SidebandSearch search = {}) {
    const double top = detail::window_limited_detuning(model, omega_p, search.max_detuning);
    if (!(top > search.guard)) return {};
    const auto grid = linspace(search.guard, top, static_cast<std::size_t>(std::max(search.scan_points, 2)));
    auto f = [&](double d) { return mismatch_at_detuning(model, omega_p, d, power_w); };

    std::vector<PhaseMatchPoint> roots;
    double prev = f(grid[0]);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double cur = f(grid[i]);
        if ((prev < 0.0) != (cur < 0.0) || cur == 0.0) {
            const double d = bisect(f, grid[i - 1], grid[i]);
            PhaseMatchPoint pt;
            pt.pump_omega = omega_p;
            pt.signal_omega = omega_p + d;
            pt.idler_omega = omega_p - d;
            pt.power_w = power_w;
            pt.residual = f(d);
            roots.push_back(pt);
        }
        prev = cur;
    }
    return roots;
}

struct MIGainCurve {
    std::vector<double> detuning;  // rad/s
    std::vector<double> gain;      // power gain coefficient, 1/m
    double power_w = 0.0;
    double pressure_bar = std::numeric_limits<double>::quiet_NaN();
};

/// Quasi-CW MI power gain g = 2 sqrt((gamma P)^2 - (dbeta / 2)^2), zero where
/// the argument is negative. dbeta is the full (SPM-shifted) mismatch.
template <DispersionLike M>
double mi_gain(const M& model, double omega_p, double power_w, double detuning) {
    const double gp = model.gamma(omega_p) * power_w;
    const double half = 0.5 * mismatch_at_detuning(model, omega_p, detuning, power_w);
    return 2.0 * std::sqrt(std::max(0.0, gp * gp - half * half));
}

template <DispersionLike M>
MIGainCurve mi_gain_curve(const M& model, double omega_p, double power_w, std::vector<double> detuning) {
    if (!(power_w > 0.0)) throw DomainError("mi_gain_curve: pump power must be > 0");
    MIGainCurve curve;
    curve.power_w = power_w;
    if constexpr (requires { model.pressure(); }) curve.pressure_bar = model.pressure();
    curve.gain.resize(detuning.size());
    for (std::size_t i = 0; i < detuning.size(); ++i) curve.gain[i] = mi_gain(model, omega_p, power_w, detuning[i]);
    curve.detuning = std::move(detuning);
    return curve;
}

/// Odd-length grid symmetric about zero: -max..max with 0 included.
inline std::vector<double> symmetric_detuning_axis(double max_detuning, std::size_t half_points) {
    std::vector<double> axis(2 * half_points + 1);
    for (std::size_t i = 0; i <= half_points; ++i) {
        const double d = max_detuning * static_cast<double>(i) / static_cast<double>(half_points);
        axis[half_points + i] = d;
        axis[half_points - i] = -d;
    }
    return axis;
}

struct GainBand {
    double peak_detuning = 0.0;  // rad/s, > 0
    double peak_gain = 0.0;
    double lower = 0.0;          // half-maximum crossings, rad/s
    double upper = 0.0;
    double fwhm() const { return upper - lower; }
};

/// Half-maximum band of the positive-detuning gain lobe containing the peak.
inline GainBand gain_band(const MIGainCurve& curve) {
    std::size_t best = curve.detuning.size();
    for (std::size_t i = 0; i < curve.detuning.size(); ++i) {
        if (curve.detuning[i] <= 0.0) continue;
        if (best == curve.detuning.size() || curve.gain[i] > curve.gain[best]) best = i;
    }
    if (best == curve.detuning.size() || !(curve.gain[best] > 0.0)) throw DomainError("gain_band: no MI gain");
    const double half = 0.5 * curve.gain[best];
    auto crossing = [&](std::size_t inside, std::size_t outside) {
        const double g0 = curve.gain[inside], g1 = curve.gain[outside];
        const double f = (g0 - half) / (g0 - g1);
        return curve.detuning[inside] + f * (curve.detuning[outside] - curve.detuning[inside]);
    };
    GainBand band;
    band.peak_detuning = curve.detuning[best];
    band.peak_gain = curve.gain[best];
    std::size_t lo = best;
    while (lo > 0 && curve.detuning[lo - 1] > 0.0 && curve.gain[lo - 1] >= half) --lo;
    band.lower = (lo > 0 && curve.gain[lo - 1] < half) ? crossing(lo, lo - 1) : curve.detuning[lo];
    std::size_t hi = best;
    while (hi + 1 < curve.detuning.size() && curve.gain[hi + 1] >= half) ++hi;
    band.upper = (hi + 1 < curve.detuning.size()) ? crossing(hi, hi + 1) : curve.detuning[hi];
    return band;
}

struct ParametricGain {
    double gain = 0.0;          // amplitude gain G
    double mean_photons = 0.0;  // sinh^2 G per mode
};

inline ParametricGain parametric_gain_from_value(double g) {
    const double s = std::sinh(g);
    return {g, s * s};
}

/// G = max_Omega g(Omega) L_eff / 2 and the per-mode occupation sinh^2 G.
inline ParametricGain parametric_gain(const MIGainCurve& curve, double effective_length_m) {
    if (!(effective_length_m > 0.0)) throw DomainError("parametric_gain: effective length must be > 0");
    const double peak = curve.gain.empty() ? 0.0 : *std::max_element(curve.gain.begin(), curve.gain.end());
    return parametric_gain_from_value(peak * effective_length_m / 2.0);
}

/// Loss-corrected effective length (1 - 10^(-alpha L / 10)) / (alpha ln10 / 10).
inline double effective_length(double length_m, double alpha_db_per_m) {
    if (!(alpha_db_per_m > 0.0)) return length_m;
    const double a = alpha_db_per_m * std::log(10.0) / 10.0;
    return -std::expm1(-a * length_m) / a;
}

struct SweepEntry {
    double control = 0.0;  // pressure (bar) or peak power (W)
    std::vector<PhaseMatchPoint> sidebands;
};

template <DispersionLike M>
std::vector<SweepEntry> power_sweep(const M& model, double omega_p, const std::vector<double>& powers_w,
                                    SidebandSearch search = {}, unsigned threads = 1) {
    for (double p : powers_w) {
        if (!(p > 0.0)) throw DomainError("power_sweep: powers must be > 0");
    }
    std::vector<SweepEntry> out(powers_w.size());
    parallel_for(powers_w.size(), threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) out[i] = {powers_w[i], solve_sidebands(model, omega_p, powers_w[i], search)};
    });
    return out;
}

inline std::vector<SweepEntry> pressure_sweep(const GasSpec& gas, const FiberGeometry& fiber, double temperature_k,
                                              double omega_p, double power_w, const std::vector<double>& pressures_bar,
                                              SidebandSearch search = {}, unsigned threads = 1) {
    std::vector<SweepEntry> out(pressures_bar.size());
    parallel_for(pressures_bar.size(), threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const DispersionModel model(gas, fiber, pressures_bar[i], temperature_k);
            out[i] = {pressures_bar[i], solve_sidebands(model, omega_p, power_w, search)};
        }
    });
    return out;
}

/// The phase-matched pair closest to the pump: the MI lobe when several roots exist.
inline std::optional<PhaseMatchPoint> innermost(const std::vector<PhaseMatchPoint>& points) {
    if (points.empty()) return std::nullopt;
    return *std::min_element(points.begin(), points.end(),
                             [](const auto& a, const auto& b) { return a.detuning() < b.detuning(); });
}

/// CSV with header `<control>,signal_THz,idler_THz,residual_rad_per_m`, one row per root.
inline void write_sweep_csv(std::ostream& os, const std::string& control_column, const std::vector<SweepEntry>& sweep) {
    os << control_column << ",signal_THz,idler_THz,residual_rad_per_m\n";
    os << std::setprecision(12);
    for (const auto& entry : sweep) {
        for (const auto& pt : entry.sidebands) {
            os << entry.control << ',' << omega_to_thz(pt.signal_omega) << ',' << omega_to_thz(pt.idler_omega) << ','
               << pt.residual << '\n';
        }
    }
}

}  // namespace twinbeam

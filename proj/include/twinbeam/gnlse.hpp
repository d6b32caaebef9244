#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <vector>

#include "twinbeam/core.hpp"
#include "twinbeam/fft.hpp"
#include "twinbeam/gas_dispersion.hpp"
#include "twinbeam/numerics.hpp"
#include "twinbeam/pump.hpp"
#include "twinbeam/rng.hpp"

namespace twinbeam {

using cplx = std::complex<double>;

/// Periodic time window of N samples centred on t = 0, carrier omega_0.
class SimulationGrid {
public:
    SimulationGrid(std::size_t samples, double window_s, double omega0)
        : n_(samples), window_(window_s), omega0_(omega0) {
        if (samples < (1u << 10) || samples > (1u << 20) || (samples & (samples - 1)) != 0) {
            throw DomainError("grid: sample count must be a power of two in [2^10, 2^20]");
        }
        if (!(window_s > 0.0)) throw DomainError("grid: time window must be > 0");
        if (!(omega0 > 0.0)) throw DomainError("grid: carrier frequency must be > 0");
        if (!(omega0 - kPi / dt() > 0.0)) throw DomainError("grid: frequency axis reaches omega <= 0");
    }

    std::size_t size() const { return n_; }
    double window() const { return window_; }
    double dt() const { return window_ / static_cast<double>(n_); }
    double omega0() const { return omega0_; }
    double time(std::size_t n) const { return (static_cast<double>(n) - static_cast<double>(n_ / 2)) * dt(); }

    /// Signed offset omega_k - omega_0 of FFT bin k.
    double detuning(std::size_t k) const {
        const auto signed_k = k < n_ / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n_);
        return kTwoPi * signed_k / window_;
    }
    double omega(std::size_t k) const { return omega0_ + detuning(k); }
    double nyquist_hz() const { return 0.5 / dt(); }
    double samples_per_thz() const { return window_ * 1e12; }

    /// Bin indices sorted by ascending frequency.
    std::vector<std::size_t> ascending_bins() const {
        std::vector<std::size_t> order(n_);
        for (std::size_t i = 0; i < n_; ++i) order[i] = (i + n_ / 2) % n_;
        return order;
    }

private:
    std::size_t n_;
    double window_;
    double omega0_;
};

/// Complex envelope A(t) in sqrt(W) on a grid, at propagation distance z.
struct FieldEnvelope {
    SimulationGrid grid;
    std::vector<cplx> samples;
    double z = 0.0;

    double energy() const {
        CompensatedSum acc;
        for (const auto& a : samples) acc.add(std::norm(a));
        return acc.value() * grid.dt();
    }

    /// Energy per frequency bin (J), FFT bin order.
    std::vector<double> spectral_energy(const FftPlan& fft) const {
        std::vector<cplx> s = samples;
        fft.to_spectrum(s);
        std::vector<double> e(s.size());
        const double scale = grid.dt() / static_cast<double>(grid.size());
        for (std::size_t k = 0; k < s.size(); ++k) e[k] = std::norm(s[k]) * scale;
        return e;
    }

    double photon_number(const FftPlan& fft) const {
        const auto e = spectral_energy(fft);
        CompensatedSum acc;
        for (std::size_t k = 0; k < e.size(); ++k) acc.add(e[k] / (kHbar * grid.omega(k)));
        return acc.value();
    }
};

/// Transform-limited Gaussian of the pump's FWHM duration and energy, centred at t = 0.
inline FieldEnvelope initial_pulse(const PumpSpec& pump, const SimulationGrid& grid) {
    pump.validate();
    const double spectral_fwhm = kGaussianTimeBandwidth / pump.duration_fwhm_s;
    if (3.0 * spectral_fwhm > grid.nyquist_hz()) {
        throw DomainError("pulse bandwidth " + describe(spectral_fwhm * 1e-12) + " THz exceeds the grid Nyquist limit");
    }
    if (grid.window() < 4.0 * pump.duration_fwhm_s) throw DomainError("time window too short for the pulse");

    FieldEnvelope f{grid, std::vector<cplx>(grid.size()), 0.0};
    const double c = 2.0 * std::log(2.0) / (pump.duration_fwhm_s * pump.duration_fwhm_s);
    for (std::size_t n = 0; n < grid.size(); ++n) {
        const double t = grid.time(n);
        f.samples[n] = std::exp(-c * t * t);
    }
    const double scale = std::sqrt(pump.energy_j / f.energy());
    for (auto& a : f.samples) a *= scale;
    return f;
}

/// Adds `photons_per_bin` photons of energy hbar omega_k with uniform random
/// phase to every frequency bin. 0 disables seeding, 0.5 is the half-photon variant.
inline FieldEnvelope seed_quantum_noise(const FieldEnvelope& field, PhiloxEngine& rng, double photons_per_bin,
                                        const FftPlan& fft) {
    if (photons_per_bin == 0.0) return field;
    if (!(photons_per_bin > 0.0)) throw DomainError("noise seeding: photons per bin must be >= 0");
    FieldEnvelope out = field;
    fft.to_spectrum(out.samples);
    const double n = static_cast<double>(field.grid.size());
    for (std::size_t k = 0; k < out.samples.size(); ++k) {
        const double amplitude = std::sqrt(photons_per_bin * kHbar * field.grid.omega(k) * n / field.grid.dt());
        const double phase = kTwoPi * rng.uniform();
        out.samples[k] += std::polar(amplitude, phase);
    }
    fft.to_time(out.samples);
    return out;
}

struct PropagationConfig {
    int steps = 600;                 // fixed steps over the fibre length; dz <= L/10
    int shots = 20;
    std::uint64_t seed = 1;
    bool self_steepening = false;
    bool loss = false;
    double photons_per_bin = 1.0;
    double energy_tolerance = 1e-6;  // relative, lossless runs only
    int snapshot_every = 0;          // 0: no z snapshots
    unsigned threads = 1;

    void validate() const {
        if (steps < 10) throw DomainError("propagation: need at least 10 steps (dz <= L/10)");
        if (shots < 1) throw DomainError("propagation: shot count must be >= 1");
        if (!(energy_tolerance > 0.0)) throw DomainError("propagation: energy tolerance must be > 0");
        if (snapshot_every < 0) throw DomainError("propagation: snapshot interval must be >= 0");
    }
};

struct Snapshot {
    double z = 0.0;
    std::vector<double> spectral_energy;  // J per bin, ascending frequency
};

struct PropagationResult {
    FieldEnvelope field;
    std::vector<Snapshot> snapshots;
    double max_energy_drift = 0.0;    // relative
    double photon_number_drift = 0.0; // relative, end vs start
};

/// Linear operator i[beta(omega) - beta(omega_0) - beta_1(omega_0)(omega - omega_0)] - alpha/2 on the grid.
template <DispersionLike M>
std::vector<cplx> linear_operator(const M& model, const SimulationGrid& grid, bool with_loss) {
    const double w0 = grid.omega0();
    const double lo = grid.omega(grid.size() / 2);
    const double hi = grid.omega(grid.size() / 2 - 1);
    if (!model.contains(lo) || !model.contains(hi)) {
        throw DomainError("grid band [" + describe(omega_to_thz(lo)) + ", " + describe(omega_to_thz(hi)) +
                          "] THz exceeds the dispersion window");
    }
    const double b0 = model.beta(w0);
    const double b1 = beta_derivative(model, w0, 1);
    std::vector<cplx> op(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double w = grid.omega(k);
        double alpha = 0.0;
        if (with_loss) {
            if constexpr (requires { model.loss_db_per_m(w); }) alpha = model.loss_db_per_m(w) * std::log(10.0) / 10.0;
        }
        op[k] = cplx(-0.5 * alpha, model.beta(w) - b0 - b1 * grid.detuning(k));
    }
    return op;
}

namespace detail {

inline double rms_duration(const FieldEnvelope& f) {
    CompensatedSum w, wt, wt2;
    for (std::size_t n = 0; n < f.samples.size(); ++n) {
        const double p = std::norm(f.samples[n]);
        const double t = f.grid.time(n);
        w.add(p);
        wt.add(p * t);
        wt2.add(p * t * t);
    }
    if (!(w.value() > 0.0)) return 0.0;
    const double mean = wt.value() / w.value();
    return std::sqrt(std::max(0.0, wt2.value() / w.value() - mean * mean));
}

inline std::vector<double> ascending_energy(const std::vector<cplx>& spectrum, const SimulationGrid& grid) {
    const double scale = grid.dt() / static_cast<double>(grid.size());
    std::vector<double> out(spectrum.size());
    const auto order = grid.ascending_bins();
    for (std::size_t i = 0; i < order.size(); ++i) out[i] = std::norm(spectrum[order[i]]) * scale;
    return out;
}

inline double spectral_norm(const std::vector<cplx>& s) {
    CompensatedSum acc;
    for (const auto& x : s) acc.add(std::norm(x));
    return acc.value();
}

}  // namespace detail

/// Symmetric split-step integration of
///   dA/dz = i D(omega) A - (alpha/2) A + i gamma (1 + i/omega_0 d/dt) |A|^2 A
/// over `length_m`, D applied spectrally with the full beta(omega). No Raman term.
template <DispersionLike M>
PropagationResult propagate(const FieldEnvelope& input, const M& model, double length_m, const PropagationConfig& cfg,
                            const FftPlan& fft) {
    cfg.validate();
    if (!(length_m > 0.0)) throw DomainError("propagate: length must be > 0");
    const auto& grid = input.grid;
    if (fft.size() != grid.size()) throw DomainError("propagate: FFT plan does not match the grid");
    const double fwhm_equiv = 2.0 * std::sqrt(2.0 * std::log(2.0)) * detail::rms_duration(input);
    if (grid.window() < 10.0 * fwhm_equiv) {
        throw DomainError("propagate: time window must be >= 10x the pulse duration");
    }

    const auto op = linear_operator(model, grid, cfg.loss);
    const double dz = length_m / cfg.steps;
    std::vector<cplx> half(op.size()), full(op.size());
    for (std::size_t k = 0; k < op.size(); ++k) {
        half[k] = std::exp(op[k] * (0.5 * dz));
        full[k] = std::exp(op[k] * dz);
    }
    const double gamma0 = model.gamma(grid.omega0());
    std::vector<double> steepening(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) steepening[k] = grid.omega(k) / grid.omega0();

    PropagationResult result{input, {}, 0.0, 0.0};
    const double photons_in = input.photon_number(fft);
    std::vector<cplx> s = input.samples;
    fft.to_spectrum(s);
    const double norm_in = detail::spectral_norm(s);
    // Plain Kerr conserves energy exactly; with self-steepening only photon number is conserved.
    const bool lossless = !cfg.loss && !cfg.self_steepening;

    std::vector<cplx> work(s.size()), k1(s.size()), k2(s.size()), k3(s.size()), k4(s.size()), tmp(s.size());
    // Nonlinear right-hand side i gamma (omega/omega_0) FT(|A|^2 A), returned in time domain.
    auto rhs = [&](const std::vector<cplx>& a, std::vector<cplx>& out) {
        for (std::size_t n = 0; n < a.size(); ++n) out[n] = std::norm(a[n]) * a[n];
        fft.to_spectrum(out);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] *= cplx(0.0, gamma0 * steepening[k]);
        fft.to_time(out);
    };

    auto check = [&](const std::vector<cplx>& spectrum, double z) {
        const double norm = detail::spectral_norm(spectrum);
        if (!std::isfinite(norm)) throw DomainError("propagate: non-finite field at z = " + describe(z) + " m");
        if (lossless) {
            const double drift = std::abs(norm / norm_in - 1.0);
            result.max_energy_drift = std::max(result.max_energy_drift, drift);
            if (drift > cfg.energy_tolerance) {
                throw DomainError("propagate: energy drift " + describe(drift) + " exceeds tolerance at z = " +
                                  describe(z) + " m");
            }
        }
    };

    for (std::size_t k = 0; k < s.size(); ++k) s[k] *= half[k];
    for (int step = 0; step < cfg.steps; ++step) {
        work = s;
        fft.to_time(work);
        if (!cfg.self_steepening) {
            for (auto& a : work) a *= std::polar(1.0, gamma0 * std::norm(a) * dz);
        } else {
            rhs(work, k1);
            for (std::size_t n = 0; n < work.size(); ++n) tmp[n] = work[n] + 0.5 * dz * k1[n];
            rhs(tmp, k2);
            for (std::size_t n = 0; n < work.size(); ++n) tmp[n] = work[n] + 0.5 * dz * k2[n];
            rhs(tmp, k3);
            for (std::size_t n = 0; n < work.size(); ++n) tmp[n] = work[n] + dz * k3[n];
            rhs(tmp, k4);
            for (std::size_t n = 0; n < work.size(); ++n) {
                work[n] += dz / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
            }
        }
        fft.to_spectrum(work);
        s.swap(work);

        const bool last = step + 1 == cfg.steps;
        const bool snap = cfg.snapshot_every > 0 && ((step + 1) % cfg.snapshot_every == 0 || last);
        const double z = dz * (step + 1);
        if (last || snap) {
            for (std::size_t k = 0; k < s.size(); ++k) s[k] *= half[k];
            check(s, z);
            if (snap) result.snapshots.push_back({input.z + z, detail::ascending_energy(s, grid)});
            if (!last) {
                for (std::size_t k = 0; k < s.size(); ++k) s[k] *= half[k];
            }
        } else {
            for (std::size_t k = 0; k < s.size(); ++k) s[k] *= full[k];
            check(s, z);
        }
    }

    fft.to_time(s);
    result.field.samples = std::move(s);
    result.field.z = input.z + length_m;
    const double photons_out = result.field.photon_number(fft);
    result.photon_number_drift = photons_in > 0.0 ? std::abs(photons_out / photons_in - 1.0) : 0.0;
    return result;
}

struct EnsembleSpectrum {
    std::vector<double> frequency_thz;   // ascending
    std::vector<double> wavelength_nm;
    std::vector<double> energy;          // mean J per bin
    std::vector<double> psd_db;          // relative to the maximum bin
    int shots = 0;
    std::uint64_t seed = 0;
    std::vector<Snapshot> snapshots;     // mean over shots, when requested
};

/// Mean output spectrum over independently seeded shots. Shot i uses noise
/// stream i of the master seed; averaging runs in shot order.
template <DispersionLike M>
EnsembleSpectrum ensemble_spectrum(const PumpSpec& pump, const M& model, double length_m, const SimulationGrid& grid,
                                   const PropagationConfig& cfg) {
    cfg.validate();
    const FftPlan fft(grid.size());
    const FieldEnvelope pulse = initial_pulse(pump, grid);
    const CounterRng rng(cfg.seed, 0x6e6f6973u);  // "nois"

    const auto shots = static_cast<std::size_t>(cfg.shots);
    std::vector<std::vector<double>> per_shot(shots);
    std::vector<std::vector<Snapshot>> per_shot_snaps(shots);
    parallel_for(shots, cfg.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            auto engine = rng.engine(i);
            const auto seeded = seed_quantum_noise(pulse, engine, cfg.photons_per_bin, fft);
            auto res = propagate(seeded, model, length_m, cfg, fft);
            std::vector<cplx> s = res.field.samples;
            fft.to_spectrum(s);
            per_shot[i] = detail::ascending_energy(s, grid);
            per_shot_snaps[i] = std::move(res.snapshots);
        }
    });

    EnsembleSpectrum out;
    out.shots = cfg.shots;
    out.seed = cfg.seed;
    const auto order = grid.ascending_bins();
    const std::size_t n = grid.size();
    out.frequency_thz.resize(n);
    out.wavelength_nm.resize(n);
    out.energy.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = grid.omega(order[i]);
        out.frequency_thz[i] = omega_to_thz(w);
        out.wavelength_nm[i] = omega_to_wavelength(w) * 1e9;
        CompensatedSum acc;
        for (std::size_t s = 0; s < shots; ++s) acc.add(per_shot[s][i]);
        out.energy[i] = acc.value() / static_cast<double>(shots);
    }
    const double peak = *std::max_element(out.energy.begin(), out.energy.end());
    out.psd_db.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.psd_db[i] = 10.0 * std::log10(out.energy[i] / peak);

    if (!per_shot_snaps.empty() && !per_shot_snaps[0].empty()) {
        out.snapshots = per_shot_snaps[0];
        for (std::size_t j = 0; j < out.snapshots.size(); ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                CompensatedSum acc;
                for (std::size_t s = 0; s < shots; ++s) acc.add(per_shot_snaps[s][j].spectral_energy[i]);
                out.snapshots[j].spectral_energy[i] = acc.value() / static_cast<double>(shots);
            }
        }
    }
    return out;
}

struct SidebandMeasurement {
    bool found = false;
    double peak_thz = 0.0;         // absolute frequency
    double detuning_thz = 0.0;     // signed, relative to the pump
    double width_3db_thz = 0.0;
    double peak_db = 0.0;          // relative to the spectrum maximum
};

/// Locates the sideband peak on one side of the pump (side = +1 blue, -1 red)
/// beyond `exclusion_thz`, after a moving average of `smoothing_thz`, and its
/// contiguous -3 dB width. `found` is false when the maximum sits on the
/// exclusion edge, i.e. the pump wing dominates.
inline SidebandMeasurement measure_sideband(const EnsembleSpectrum& spec, double pump_thz, int side,
                                            double exclusion_thz, double max_detuning_thz, double smoothing_thz = 1.0) {
    const std::size_t n = spec.frequency_thz.size();
    if (n < 3) throw DomainError("measure_sideband: spectrum too short");
    const double df = spec.frequency_thz[1] - spec.frequency_thz[0];
    const auto half_window = static_cast<std::size_t>(std::max(0.0, std::round(0.5 * smoothing_thz / df)));
    std::vector<double> smooth(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half_window ? i - half_window : 0;
        const std::size_t hi = std::min(n - 1, i + half_window);
        CompensatedSum acc;
        for (std::size_t j = lo; j <= hi; ++j) acc.add(spec.energy[j]);
        smooth[i] = acc.value() / static_cast<double>(hi - lo + 1);
    }
    auto in_region = [&](std::size_t i) {
        const double d = side * (spec.frequency_thz[i] - pump_thz);
        return d >= exclusion_thz && d <= max_detuning_thz;
    };
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (in_region(i) && (best == n || smooth[i] > smooth[best])) best = i;
    }
    SidebandMeasurement m;
    if (best == n) return m;
    if (best == 0 || best == n - 1 || !in_region(best - 1) || !in_region(best + 1)) return m;
    const double half = 0.5 * smooth[best];
    std::size_t lo = best, hi = best;
    while (lo > 0 && smooth[lo - 1] >= half) --lo;
    while (hi + 1 < n && smooth[hi + 1] >= half) ++hi;
    auto cross = [&](std::size_t inside, std::size_t outside) {
        const double f = (smooth[inside] - half) / (smooth[inside] - smooth[outside]);
        return spec.frequency_thz[inside] + f * (spec.frequency_thz[outside] - spec.frequency_thz[inside]);
    };
    const double f_lo = lo > 0 ? cross(lo, lo - 1) : spec.frequency_thz[lo];
    const double f_hi = hi + 1 < n ? cross(hi, hi + 1) : spec.frequency_thz[hi];
    const double global_peak = *std::max_element(spec.energy.begin(), spec.energy.end());
    m.found = true;
    m.peak_thz = spec.frequency_thz[best];
    m.detuning_thz = spec.frequency_thz[best] - pump_thz;
    m.width_3db_thz = f_hi - f_lo;
    m.peak_db = 10.0 * std::log10(smooth[best] / global_peak);
    return m;
}

/// CSV `freq_THz,wavelength_nm,psd_db`.
inline void write_spectrum_csv(std::ostream& os, const EnsembleSpectrum& spec) {
    os << "freq_THz,wavelength_nm,psd_db\n" << std::setprecision(12);
    for (std::size_t i = 0; i < spec.frequency_thz.size(); ++i) {
        os << spec.frequency_thz[i] << ',' << spec.wavelength_nm[i] << ',' << spec.psd_db[i] << '\n';
    }
}

/// z-evolution matrix: first row is `z_m` followed by the frequency axis (THz),
/// then one row per snapshot with the spectrum in dB relative to its global maximum.
inline void write_evolution_csv(std::ostream& os, const EnsembleSpectrum& spec) {
    os << std::setprecision(10) << "z_m";
    for (double f : spec.frequency_thz) os << ',' << f;
    os << '\n';
    double peak = 0.0;
    for (const auto& s : spec.snapshots) peak = std::max(peak, *std::max_element(s.spectral_energy.begin(), s.spectral_energy.end()));
    for (const auto& s : spec.snapshots) {
        os << s.z;
        for (double e : s.spectral_energy) os << ',' << 10.0 * std::log10(std::max(e, 1e-300) / peak);
        os << '\n';
    }
}

}  // namespace twinbeam

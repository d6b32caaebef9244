#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "twinbeam/core.hpp"
#include "twinbeam/numerics.hpp"
#include "twinbeam/rng.hpp"

namespace twinbeam {

struct ChannelEfficiency {
    double signal = 1.0;
    double idler = 1.0;
};

inline void check_efficiency(double eta, const char* what) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError(std::string(what) + " must lie in [0, 1], got " + describe(eta));
}

/// Mean photon number per Schmidt mode, optionally with a per-mode efficiency
/// pair that models spectrally unmatched detection channels.
struct ModeSet {
    std::vector<double> mean_photons;
    std::vector<ChannelEfficiency> efficiency;  // empty, or one entry per mode

    std::size_t size() const { return mean_photons.size(); }
    bool per_mode_efficiency() const { return !efficiency.empty(); }

    double total() const { return compensated_sum(mean_photons); }

    void validate() const {
        if (mean_photons.empty()) throw DomainError("mode set: at least one mode required");
        for (double mu : mean_photons) {
            if (!(mu >= 0.0) || !std::isfinite(mu)) throw DomainError("mode set: mean photon numbers must be finite and >= 0");
        }
        if (!efficiency.empty()) {
            if (efficiency.size() != mean_photons.size()) throw DomainError("mode set: one efficiency pair per mode required");
            for (const auto& e : efficiency) {
                check_efficiency(e.signal, "mode efficiency");
                check_efficiency(e.idler, "mode efficiency");
            }
        }
    }
};

/// Occupations proportional to the Schmidt weights, mu_m = total * lambda_m.
/// For this family g2 - 1 = sum lambda^2 = 1 / K exactly.
inline ModeSet modes_from_weights(std::span<const double> weights, double total_photons) {
    const double norm = compensated_sum(weights);
    if (!(norm > 0.0)) throw DomainError("modes_from_weights: weights must sum to > 0");
    ModeSet m;
    for (double w : weights) {
        if (!(w >= 0.0)) throw DomainError("modes_from_weights: weights must be >= 0");
        m.mean_photons.push_back(total_photons * w / norm);
    }
    return m;
}

/// High-gain occupations mu_m = sinh^2(G s_m / s_1), keeping at most `max_modes`.
inline ModeSet modes_from_singular_values(double gain, std::span<const double> singular_values, std::size_t max_modes = 10) {
    if (singular_values.empty()) throw DomainError("modes_from_singular_values: no singular values");
    const double top = *std::max_element(singular_values.begin(), singular_values.end());
    if (!(top > 0.0)) throw DomainError("modes_from_singular_values: largest singular value must be > 0");
    std::vector<double> s(singular_values.begin(), singular_values.end());
    std::sort(s.begin(), s.end(), std::greater<>());
    s.resize(std::min(s.size(), std::max<std::size_t>(max_modes, 1)));
    ModeSet m;
    for (double v : s) {
        const double x = std::sinh(gain * v / top);
        m.mean_photons.push_back(x * x);
    }
    return m;
}

/// Geometric weights lambda_m ~ r^m over `modes` modes with 1 / sum lambda^2 = k.
inline std::vector<double> weights_for_schmidt_number(double k, std::size_t modes = 64) {
    if (!(k >= 1.0)) throw DomainError("weights_for_schmidt_number: K must be >= 1");
    if (!(k <= static_cast<double>(modes))) throw DomainError("weights_for_schmidt_number: K exceeds the mode count");
    auto weights = [&](double r) {
        std::vector<double> w(modes);
        double p = 1.0;
        for (auto& x : w) {
            x = p;
            p *= r;
        }
        const double sum = compensated_sum(w);
        for (auto& x : w) x /= sum;
        return w;
    };
    auto schmidt = [&](double r) {
        CompensatedSum acc;
        for (double x : weights(r)) acc.add(x * x);
        return 1.0 / acc.value();
    };
    if (k == 1.0) return weights(0.0);
    if (k == static_cast<double>(modes)) return weights(1.0);
    return weights(bisect([&](double r) { return schmidt(r) - k; }, 0.0, 1.0));
}

enum class Stage { generated, lossy, detected };

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::generated: return "generated";
        case Stage::lossy: return "lossy";
        case Stage::detected: return "detected";
    }
    return "unknown";
}

struct DetectorSpec {
    double qe = 0.95;
    double gain_pvs = 2.096;      // pV s per photon
    double sigma_photons = 600.0;  // additive Gaussian noise, photons/pulse

    void validate() const {
        check_efficiency(qe, "detector QE");
        if (!(gain_pvs > 0.0)) throw DomainError("detector gain must be > 0");
        if (!(sigma_photons >= 0.0)) throw DomainError("detector noise must be >= 0");
    }
};

/// Per-pulse photon numbers for the two beams. Integer counts are kept at every
/// stage; detected ensembles additionally carry the readout areas in pV s.
struct PulseEnsemble {
    Stage stage = Stage::generated;
    std::uint64_t seed = 0;
    std::vector<std::uint32_t> signal;
    std::vector<std::uint32_t> idler;

    // Generated stage only, when the mode set carries per-mode efficiencies:
    // photons of mode m in pulse p at mode_counts[p * mode_efficiency.size() + m].
    std::vector<std::uint32_t> mode_counts;
    std::vector<ChannelEfficiency> mode_efficiency;

    std::vector<double> signal_readout;  // pV s
    std::vector<double> idler_readout;
    DetectorSpec signal_detector;
    DetectorSpec idler_detector;

    std::size_t pulses() const { return signal.size(); }

    /// Photon-equivalent values: counts, or readout / gain once detected.
    double signal_value(std::size_t p) const {
        return stage == Stage::detected ? signal_readout[p] / signal_detector.gain_pvs : signal[p];
    }
    double idler_value(std::size_t p) const {
        return stage == Stage::detected ? idler_readout[p] / idler_detector.gain_pvs : idler[p];
    }

    /// Additive noise variance in photon units, per channel (zero before detection).
    double signal_noise_variance() const {
        return stage == Stage::detected ? signal_detector.sigma_photons * signal_detector.sigma_photons : 0.0;
    }
    double idler_noise_variance() const {
        return stage == Stage::detected ? idler_detector.sigma_photons * idler_detector.sigma_photons : 0.0;
    }
};

namespace detail {

inline std::uint32_t checked_count(std::uint64_t n) {
    if (n > std::numeric_limits<std::uint32_t>::max()) throw DomainError("photon count exceeds 32-bit range");
    return static_cast<std::uint32_t>(n);
}

inline std::uint32_t bose_einstein(PhiloxEngine& eng, double mu) {
    if (mu == 0.0) return 0;
    std::geometric_distribution<std::uint64_t> draw(1.0 / (1.0 + mu));
    return checked_count(draw(eng));
}

inline std::uint32_t thin(PhiloxEngine& eng, std::uint32_t n, double eta) {
    if (eta >= 1.0 || n == 0) return n;
    if (eta <= 0.0) return 0;
    std::binomial_distribution<std::uint32_t> draw(n, eta);
    return draw(eng);
}

}  // namespace detail

/// Perfectly paired thermal photon numbers: every mode draws one Bose-Einstein
/// number per pulse and adds it to both beams.
inline PulseEnsemble sample_twin_beam(const ModeSet& modes, std::size_t pulses, const CounterRng& rng, unsigned threads = 1) {
    modes.validate();
    if (pulses < 1) throw DomainError("sample_twin_beam: need at least one pulse");
    PulseEnsemble out;
    out.seed = rng.seed();
    out.signal.resize(pulses);
    const std::size_t m = modes.size();
    if (modes.per_mode_efficiency()) {
        out.mode_efficiency = modes.efficiency;
        out.mode_counts.resize(pulses * m);
    }
    parallel_for(pulses, threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t p = b; p < e; ++p) {
            auto eng = rng.engine(p);
            std::uint64_t total = 0;
            for (std::size_t k = 0; k < m; ++k) {
                const auto n = detail::bose_einstein(eng, modes.mean_photons[k]);
                if (!out.mode_counts.empty()) out.mode_counts[p * m + k] = n;
                total += n;
            }
            out.signal[p] = detail::checked_count(total);
        }
    });
    out.idler = out.signal;
    return out;
}

/// Independent binomial thinning of each beam. A generated ensemble that kept
/// per-mode counts is thinned mode by mode with eta * eta_m before summation.
inline PulseEnsemble apply_loss(const PulseEnsemble& in, double eta_s, double eta_i, const CounterRng& rng, unsigned threads = 1) {
    if (in.stage == Stage::detected) throw DomainError("apply_loss: ensemble is already detected");
    check_efficiency(eta_s, "signal efficiency");
    check_efficiency(eta_i, "idler efficiency");
    PulseEnsemble out;
    out.stage = Stage::lossy;
    out.seed = in.seed;
    const std::size_t n = in.pulses();
    out.signal.resize(n);
    out.idler.resize(n);
    const std::size_t m = in.mode_efficiency.size();
    const bool per_mode = m > 0 && in.mode_counts.size() == n * m;
    parallel_for(n, threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t p = b; p < e; ++p) {
            auto eng = rng.engine(p);
            if (per_mode) {
                std::uint64_t s = 0, i = 0;
                for (std::size_t k = 0; k < m; ++k) {
                    const auto count = in.mode_counts[p * m + k];
                    s += detail::thin(eng, count, eta_s * in.mode_efficiency[k].signal);
                    i += detail::thin(eng, count, eta_i * in.mode_efficiency[k].idler);
                }
                out.signal[p] = static_cast<std::uint32_t>(s);
                out.idler[p] = static_cast<std::uint32_t>(i);
            } else {
                out.signal[p] = detail::thin(eng, in.signal[p], eta_s);
                out.idler[p] = detail::thin(eng, in.idler[p], eta_i);
            }
        }
    });
    return out;
}

/// Charge-amplifier readout: area = gain * (N + noise), noise ~ N(0, sigma) in
/// photons. Quantum efficiency is part of the loss budget, not applied here.
inline PulseEnsemble detect(const PulseEnsemble& in, const DetectorSpec& det_s, const DetectorSpec& det_i,
                            const CounterRng& rng, unsigned threads = 1) {
    if (in.stage == Stage::detected) throw DomainError("detect: ensemble is already detected");
    det_s.validate();
    det_i.validate();
    PulseEnsemble out;
    out.stage = Stage::detected;
    out.seed = in.seed;
    out.signal = in.signal;
    out.idler = in.idler;
    out.signal_detector = det_s;
    out.idler_detector = det_i;
    const std::size_t n = in.pulses();
    out.signal_readout.resize(n);
    out.idler_readout.resize(n);
    parallel_for(n, threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t p = b; p < e; ++p) {
            auto eng = rng.engine(p);
            std::normal_distribution<double> noise;
            const double ns = noise(eng) * det_s.sigma_photons;
            const double ni = noise(eng) * det_i.sigma_photons;
            out.signal_readout[p] = det_s.gain_pvs * (static_cast<double>(in.signal[p]) + ns);
            out.idler_readout[p] = det_i.gain_pvs * (static_cast<double>(in.idler[p]) + ni);
        }
    });
    return out;
}

struct BootstrapOptions {
    std::size_t block = 1000;
    std::size_t resamples = 400;
    std::uint64_t seed = 0x626f6f74;
};

struct NrfOptions {
    BootstrapOptions bootstrap;
    bool subtract_noise = false;  // remove the known detector variance from Var(N_s - N_i)
};

struct NRFResult {
    double nrf = 0.0;
    double std_error = 0.0;
    double mean_total = 0.0;      // <N_s + N_i>
    double variance_difference = 0.0;
    std::size_t pulses = 0;
};

namespace detail {

/// Sufficient statistics of one contiguous block of pulses for a pair (x, y):
/// counts, sums of x, x^2 and y. x is shifted by `x_shift` before squaring.
struct BlockMoments {
    double n = 0.0;
    double sx = 0.0;
    double sxx = 0.0;
    double sy = 0.0;
};

template <class X, class Y>
std::vector<BlockMoments> block_moments(std::size_t n, std::size_t block, double x_shift, X&& x, Y&& y) {
    std::vector<BlockMoments> blocks;
    for (std::size_t b = 0; b < n; b += block) {
        const std::size_t e = std::min(n, b + block);
        CompensatedSum sx, sxx, sy;
        for (std::size_t p = b; p < e; ++p) {
            const double v = x(p) - x_shift;
            sx.add(v);
            sxx.add(v * v);
            sy.add(y(p));
        }
        blocks.push_back({static_cast<double>(e - b), sx.value(), sxx.value(), sy.value()});
    }
    return blocks;
}

inline std::size_t effective_block(std::size_t n, std::size_t requested) {
    return std::clamp<std::size_t>(requested, 1, std::max<std::size_t>(1, n / 10));
}

/// Standard deviation of `stat` over block-bootstrap resamples of `blocks`.
template <class Stat>
double block_bootstrap_se(const std::vector<BlockMoments>& blocks, const BootstrapOptions& opt, Stat&& stat) {
    if (opt.resamples < 2 || blocks.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> values;
    values.reserve(opt.resamples);
    const CounterRng rng(opt.seed, 0x62627374);
    for (std::size_t r = 0; r < opt.resamples; ++r) {
        auto eng = rng.engine(r);
        std::uniform_int_distribution<std::size_t> pick(0, blocks.size() - 1);
        BlockMoments acc;
        for (std::size_t k = 0; k < blocks.size(); ++k) {
            const auto& b = blocks[pick(eng)];
            acc.n += b.n;
            acc.sx += b.sx;
            acc.sxx += b.sxx;
            acc.sy += b.sy;
        }
        values.push_back(stat(acc));
    }
    const double mean = compensated_sum(values) / static_cast<double>(values.size());
    CompensatedSum ss;
    for (double v : values) ss.add((v - mean) * (v - mean));
    return std::sqrt(ss.value() / static_cast<double>(values.size() - 1));
}

inline double variance_from(const BlockMoments& m) {
    return (m.sxx - m.sx * m.sx / m.n) / (m.n - 1.0);
}

}  // namespace detail

/// NRF = Var(N_s - N_i) / <N_s + N_i> with the unbiased sample variance and a
/// block-bootstrap standard error.
inline NRFResult estimate_nrf(const PulseEnsemble& ens, const NrfOptions& opt = {}) {
    const std::size_t n = ens.pulses();
    if (n < 2) throw DomainError("estimate_nrf: need at least two pulses");
    auto diff = [&](std::size_t p) { return ens.signal_value(p) - ens.idler_value(p); };
    auto total = [&](std::size_t p) { return ens.signal_value(p) + ens.idler_value(p); };

    CompensatedSum sd, st;
    for (std::size_t p = 0; p < n; ++p) {
        sd.add(diff(p));
        st.add(total(p));
    }
    const double mean_d = sd.value() / static_cast<double>(n);
    const double mean_t = st.value() / static_cast<double>(n);
    if (!(mean_t != 0.0)) throw DomainError("estimate_nrf: mean total photon number is zero");
    CompensatedSum ss;
    for (std::size_t p = 0; p < n; ++p) {
        const double v = diff(p) - mean_d;
        ss.add(v * v);
    }
    const double noise = opt.subtract_noise ? ens.signal_noise_variance() + ens.idler_noise_variance() : 0.0;

    NRFResult r;
    r.pulses = n;
    r.mean_total = mean_t;
    r.variance_difference = ss.value() / static_cast<double>(n - 1) - noise;
    r.nrf = r.variance_difference / mean_t;
    const auto blocks = detail::block_moments(n, detail::effective_block(n, opt.bootstrap.block), mean_d, diff, total);
    r.std_error = detail::block_bootstrap_se(blocks, opt.bootstrap, [&](const detail::BlockMoments& m) {
        return (detail::variance_from(m) - noise) / (m.sy / m.n);
    });
    return r;
}

struct NrfShift {
    double shift = 0.0;  // NRF(after) - NRF(before)
    double std_error = 0.0;
};

/// NRF difference between two ensembles of the same pulses (e.g. before and
/// after detection), with a paired block bootstrap so shared fluctuations cancel.
inline NrfShift compare_nrf(const PulseEnsemble& before, const PulseEnsemble& after, const BootstrapOptions& opt = {}) {
    const std::size_t n = before.pulses();
    if (n != after.pulses() || n < 2) throw DomainError("compare_nrf: ensembles must have the same number (>= 2) of pulses");
    const std::size_t block = detail::effective_block(n, opt.block);
    auto moments = [&](const PulseEnsemble& e) {
        return detail::block_moments(
            n, block, 0.0, [&](std::size_t p) { return e.signal_value(p) - e.idler_value(p); },
            [&](std::size_t p) { return e.signal_value(p) + e.idler_value(p); });
    };
    const auto a = moments(before);
    const auto b = moments(after);
    auto nrf_of = [](const detail::BlockMoments& m) { return detail::variance_from(m) / (m.sy / m.n); };
    auto sum_all = [](const std::vector<detail::BlockMoments>& v) {
        detail::BlockMoments s;
        for (const auto& m : v) {
            s.n += m.n;
            s.sx += m.sx;
            s.sxx += m.sxx;
            s.sy += m.sy;
        }
        return s;
    };
    NrfShift out;
    out.shift = nrf_of(sum_all(b)) - nrf_of(sum_all(a));

    if (opt.resamples >= 2 && a.size() >= 2) {
        const CounterRng rng(opt.seed, 0x70616972);
        std::vector<double> values;
        for (std::size_t r = 0; r < opt.resamples; ++r) {
            auto eng = rng.engine(r);
            std::uniform_int_distribution<std::size_t> pick(0, a.size() - 1);
            detail::BlockMoments sa, sb;
            for (std::size_t k = 0; k < a.size(); ++k) {
                const std::size_t j = pick(eng);
                for (auto [acc, src] : {std::pair{&sa, &a[j]}, std::pair{&sb, &b[j]}}) {
                    acc->n += src->n;
                    acc->sx += src->sx;
                    acc->sxx += src->sxx;
                    acc->sy += src->sy;
                }
            }
            values.push_back(nrf_of(sb) - nrf_of(sa));
        }
        const double mean = compensated_sum(values) / static_cast<double>(values.size());
        CompensatedSum ss;
        for (double v : values) ss.add((v - mean) * (v - mean));
        out.std_error = std::sqrt(ss.value() / static_cast<double>(values.size() - 1));
    } else {
        out.std_error = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

enum class Channel { signal, idler };

struct G2Result {
    double g2 = 0.0;
    double std_error = 0.0;
    double mean = 0.0;
    double k = 0.0;            // 1 / (g2 - 1); infinity when unbounded
    bool k_unbounded = false;  // g2 <= 1 after noise correction
};

/// g2 = <N(N-1)> / <N>^2. Detected readouts have the detector variance removed
/// from the second moment first.
inline G2Result estimate_g2(const PulseEnsemble& ens, Channel channel, const BootstrapOptions& opt = {}) {
    const std::size_t n = ens.pulses();
    if (n < 2) throw DomainError("estimate_g2: need at least two pulses");
    auto x = [&](std::size_t p) { return channel == Channel::signal ? ens.signal_value(p) : ens.idler_value(p); };
    const double noise = channel == Channel::signal ? ens.signal_noise_variance() : ens.idler_noise_variance();

    CompensatedSum sx;
    for (std::size_t p = 0; p < n; ++p) sx.add(x(p));
    const double mean = sx.value() / static_cast<double>(n);
    if (!(mean > 0.0)) throw DomainError("estimate_g2: mean photon number must be > 0");
    // Moments about `mean` keep the second moment well conditioned for bright light.
    const auto blocks = detail::block_moments(n, detail::effective_block(n, opt.block), mean, x, [](std::size_t) { return 0.0; });
    auto g2_of = [&](const detail::BlockMoments& m) {
        const double shifted_mean = m.sx / m.n;
        const double mu = mean + shifted_mean;
        const double second = m.sxx / m.n + 2.0 * mean * shifted_mean + mean * mean;  // <x^2>
        return (second - noise - mu) / (mu * mu);
    };
    detail::BlockMoments all;
    for (const auto& b : blocks) {
        all.n += b.n;
        all.sx += b.sx;
        all.sxx += b.sxx;
    }
    G2Result r;
    r.mean = mean;
    r.g2 = g2_of(all);
    r.std_error = detail::block_bootstrap_se(blocks, opt, g2_of);
    r.k_unbounded = !(r.g2 > 1.0);
    r.k = r.k_unbounded ? std::numeric_limits<double>::infinity() : 1.0 / (r.g2 - 1.0);
    return r;
}

/// Coherent (Poisson) pulses with mean `mean_total` split signal:idler = ratio:1.
inline PulseEnsemble sample_coherent(double mean_total, double ratio, std::size_t pulses, const CounterRng& rng, unsigned threads = 1) {
    if (!(mean_total >= 0.0)) throw DomainError("sample_coherent: mean photon number must be >= 0");
    if (!(ratio > 0.0)) throw DomainError("sample_coherent: split ratio must be > 0");
    if (pulses < 1) throw DomainError("sample_coherent: need at least one pulse");
    const double ms = mean_total * ratio / (1.0 + ratio);
    const double mi = mean_total / (1.0 + ratio);
    PulseEnsemble out;
    out.seed = rng.seed();
    out.signal.resize(pulses);
    out.idler.resize(pulses);
    parallel_for(pulses, threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t p = b; p < e; ++p) {
            auto eng = rng.engine(p);
            std::poisson_distribution<std::uint64_t> ds(ms > 0.0 ? ms : 1.0), di(mi > 0.0 ? mi : 1.0);
            out.signal[p] = ms > 0.0 ? detail::checked_count(ds(eng)) : 0;
            out.idler[p] = mi > 0.0 ? detail::checked_count(di(eng)) : 0;
        }
    });
    return out;
}

struct CalibrationPoint {
    double ratio = 1.0;
    double mean_total = 0.0;  // photon-equivalent <N_s + N_i>
    double variance = 0.0;    // Var(N_s - N_i), photon-equivalent
    double raw_nrf = 0.0;
    double calibrated_nrf = 0.0;
};

struct CalibrationResult {
    LinearFit fit;  // variance = intercept + slope * mean_total
    std::vector<CalibrationPoint> points;

    /// NRF relative to the fitted shot-noise line: (Var - intercept) / (slope <N>).
    double calibrate(double variance, double mean_total) const {
        return (variance - fit.intercept) / (fit.slope * mean_total);
    }
};

/// Shot-noise calibration: coherent light at every (ratio, power) pair is
/// detected, and Var(N_s - N_i) against <N_s + N_i> is fitted with one line.
inline CalibrationResult calibrate_shot_noise(std::span<const double> ratios, std::span<const double> mean_totals,
                                              std::size_t pulses, const DetectorSpec& det_s, const DetectorSpec& det_i,
                                              const CounterRng& rng, unsigned threads = 1) {
    if (ratios.empty() || mean_totals.empty()) throw DomainError("calibrate_shot_noise: need ratios and powers");
    CalibrationResult out;
    std::vector<double> xs, ys;
    std::uint32_t tag = 0;
    for (double ratio : ratios) {
        for (double mean : mean_totals) {
            const auto light = sample_coherent(mean, ratio, pulses, rng.substream(2 * tag), threads);
            const auto det = detect(light, det_s, det_i, rng.substream(2 * tag + 1), threads);
            ++tag;
            NrfOptions opt;
            opt.bootstrap.resamples = 0;
            const auto r = estimate_nrf(det, opt);
            out.points.push_back({ratio, r.mean_total, r.variance_difference, r.nrf, 0.0});
            xs.push_back(r.mean_total);
            ys.push_back(r.variance_difference);
        }
    }
    out.fit = fit_line(xs, ys);
    for (auto& pt : out.points) pt.calibrated_nrf = out.calibrate(pt.variance, pt.mean_total);
    return out;
}

enum class BudgetChannel { both, signal, idler };

struct LossElement {
    std::string name;
    double transmission = 1.0;
    int count = 1;
    BudgetChannel channel = BudgetChannel::both;
};

struct LossBudget {
    std::vector<LossElement> elements;
};

struct LossBudgetResult {
    double eta_signal = 1.0;
    double eta_idler = 1.0;
    double eta_total = 1.0;
    double nrf_best = 0.0;
    double nrf_best_db = -std::numeric_limits<double>::infinity();
};

/// Channel transmissions as products of T^count. For unequal channels the
/// effective efficiency is (eta_s^2 + eta_i^2) / (eta_s + eta_i), so 1 - eta is
/// the NRF of a fixed pair number; pair-number fluctuations add
/// (eta_s - eta_i)^2 Var(N) / <N_s + N_i> on top.
inline LossBudgetResult loss_budget(const LossBudget& budget) {
    if (budget.elements.empty()) throw DomainError("loss_budget: budget has no elements");
    LossBudgetResult r;
    for (const auto& el : budget.elements) {
        if (!(el.transmission > 0.0 && el.transmission <= 1.0)) {
            throw DomainError("loss_budget: transmission of '" + el.name + "' must lie in (0, 1]");
        }
        if (el.count < 1) throw DomainError("loss_budget: count of '" + el.name + "' must be >= 1");
        const double t = std::pow(el.transmission, el.count);
        if (el.channel != BudgetChannel::idler) r.eta_signal *= t;
        if (el.channel != BudgetChannel::signal) r.eta_idler *= t;
    }
    r.eta_total = (r.eta_signal * r.eta_signal + r.eta_idler * r.eta_idler) / (r.eta_signal + r.eta_idler);
    r.nrf_best = 1.0 - r.eta_total;
    r.nrf_best_db = 10.0 * std::log10(r.nrf_best);
    return r;
}

struct AttenuationPoint {
    double extra_eta = 0.0;
    double total_eta = 0.0;
    bool valid = false;  // false when no light reaches the detectors
    NRFResult nrf;
};

struct AttenuationSweep {
    std::vector<AttenuationPoint> points;
    LinearFit fit;  // NRF against extra_eta over the valid points
};

/// NRF of paired light through base and extra symmetric efficiencies. The
/// fully blocked endpoint has no photons, so its NRF is read off the fit.
inline AttenuationSweep attenuation_sweep(double base_eta, std::span<const double> extra_eta, const ModeSet& modes,
                                          std::size_t pulses, const CounterRng& rng, unsigned threads = 1,
                                          const NrfOptions& opt = {}) {
    check_efficiency(base_eta, "base efficiency");
    for (double x : extra_eta) check_efficiency(x, "extra efficiency");
    const auto source = sample_twin_beam(modes, pulses, rng.substream(0), threads);
    AttenuationSweep out;
    std::vector<double> xs, ys;
    std::uint32_t tag = 1;
    for (double x : extra_eta) {
        AttenuationPoint pt;
        pt.extra_eta = x;
        pt.total_eta = base_eta * x;
        const auto lossy = apply_loss(source, pt.total_eta, pt.total_eta, rng.substream(tag++), threads);
        try {
            pt.nrf = estimate_nrf(lossy, opt);
            pt.valid = true;
            xs.push_back(x);
            ys.push_back(pt.nrf.nrf);
        } catch (const DomainError&) {
            pt.nrf.nrf = std::numeric_limits<double>::quiet_NaN();
            pt.nrf.std_error = std::numeric_limits<double>::quiet_NaN();
        }
        out.points.push_back(pt);
    }
    out.fit = fit_line(xs, ys);
    return out;
}

struct BrightnessConfig {
    std::vector<double> gains;
    std::vector<double> singular_values{1.0};
    std::size_t max_modes = 10;
    std::vector<ChannelEfficiency> mode_efficiency;  // optional per-mode mismatch
    double eta_s = 0.45;
    double eta_i = 0.45;
    DetectorSpec detector_s{0.95, 2.096, 600.0};
    DetectorSpec detector_i{0.95, 2.178, 650.0};
    std::size_t pulses = 1'000'000;
    NrfOptions nrf;
};

struct BrightnessPoint {
    double gain = 0.0;
    double photons_per_mode = 0.0;  // sinh^2 G of the leading mode
    NRFResult lossy;                // before detection
    NRFResult detected;             // raw readouts
    NRFResult calibrated;           // readouts with the detector variance removed
};

struct BrightnessSweep {
    std::vector<BrightnessPoint> points;
    LinearFit fit;  // calibrated NRF against detected <N_s + N_i>
};

inline BrightnessSweep brightness_sweep(const BrightnessConfig& cfg, const CounterRng& rng, unsigned threads = 1) {
    if (cfg.gains.empty()) throw DomainError("brightness_sweep: no gains given");
    BrightnessSweep out;
    std::vector<double> xs, ys;
    std::uint32_t tag = 0;
    for (double g : cfg.gains) {
        auto modes = modes_from_singular_values(g, cfg.singular_values, cfg.max_modes);
        if (!cfg.mode_efficiency.empty()) {
            if (cfg.mode_efficiency.size() < modes.size()) throw DomainError("brightness_sweep: too few per-mode efficiencies");
            modes.efficiency.assign(cfg.mode_efficiency.begin(), cfg.mode_efficiency.begin() + static_cast<std::ptrdiff_t>(modes.size()));
        }
        const auto gen = sample_twin_beam(modes, cfg.pulses, rng.substream(tag), threads);
        const auto lossy = apply_loss(gen, cfg.eta_s, cfg.eta_i, rng.substream(tag + 1), threads);
        const auto det = detect(lossy, cfg.detector_s, cfg.detector_i, rng.substream(tag + 2), threads);
        tag += 3;
        BrightnessPoint pt;
        pt.gain = g;
        pt.photons_per_mode = modes.mean_photons.front();
        NrfOptions raw = cfg.nrf;
        raw.subtract_noise = false;
        NrfOptions cal = cfg.nrf;
        cal.subtract_noise = true;
        pt.lossy = estimate_nrf(lossy, raw);
        pt.detected = estimate_nrf(det, raw);
        pt.calibrated = estimate_nrf(det, cal);
        xs.push_back(pt.calibrated.mean_total);
        ys.push_back(pt.calibrated.nrf);
        out.points.push_back(pt);
    }
    if (xs.size() >= 2) out.fit = fit_line(xs, ys);
    return out;
}

/// Raw dump: per pulse the signal then idler count as little-endian u32.
inline void write_raw_counts(std::ostream& os, const PulseEnsemble& ens) {
    std::vector<unsigned char> buf;
    buf.reserve(ens.pulses() * 8);
    auto put = [&](std::uint32_t v) {
        for (int b = 0; b < 4; ++b) buf.push_back(static_cast<unsigned char>(v >> (8 * b)));
    };
    for (std::size_t p = 0; p < ens.pulses(); ++p) {
        put(ens.signal[p]);
        put(ens.idler[p]);
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

inline std::vector<std::pair<std::uint32_t, std::uint32_t>> read_raw_counts(std::span<const unsigned char> bytes) {
    if (bytes.size() % 8 != 0) throw DomainError("raw dump length is not a multiple of 8 bytes");
    auto get = [&](std::size_t at) {
        std::uint32_t v = 0;
        for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes[at + b]) << (8 * b);
        return v;
    };
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    for (std::size_t at = 0; at < bytes.size(); at += 8) out.emplace_back(get(at), get(at + 4));
    return out;
}

}  // namespace twinbeam

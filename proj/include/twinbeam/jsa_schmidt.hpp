#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "twinbeam/core.hpp"
#include "twinbeam/gas_dispersion.hpp"
#include "twinbeam/numerics.hpp"
#include "twinbeam/phase_matching.hpp"

namespace twinbeam {

/// Gaussian pump spectral amplitude, L2-normalised (sum |E|^2 d omega = 1) on
/// its midpoint grid. `operator()` evaluates the same normalised shape off-grid.
class PumpSpectralAmplitude {
public:
    /// `fwhm_m` is the intensity FWHM in wavelength; the grid covers +-span_sigmas
    /// amplitude standard deviations with `points` midpoint cells.
    PumpSpectralAmplitude(double center_wavelength_m, double fwhm_m, std::size_t points = 64, double span_sigmas = 4.0)
        : center_wavelength_(center_wavelength_m), fwhm_m_(fwhm_m) {
        if (!(center_wavelength_m > 0.0) || !(fwhm_m > 0.0)) throw DomainError("pump amplitude: wavelength and width must be > 0");
        if (points < 32) throw DomainError("pump amplitude: need at least 32 grid points");
        center_ = wavelength_to_omega(center_wavelength_m);
        const double fwhm_omega = kTwoPi * kSpeedOfLight * fwhm_m / (center_wavelength_m * center_wavelength_m);
        // |E|^2 has FWHM fwhm_omega, so E = exp(-(w - w0)^2 / (4 s^2)) with s the intensity sigma.
        intensity_sigma_ = fwhm_omega / (2.0 * std::sqrt(2.0 * std::log(2.0)));
        const double half = span_sigmas * std::sqrt(2.0) * intensity_sigma_;
        step_ = 2.0 * half / static_cast<double>(points);
        axis_.resize(points);
        for (std::size_t i = 0; i < points; ++i) axis_[i] = center_ - half + (static_cast<double>(i) + 0.5) * step_;
        norm_ = 1.0;
        CompensatedSum acc;
        for (double w : axis_) acc.add(shape(w) * shape(w));
        norm_ = 1.0 / std::sqrt(acc.value() * step_);
        amplitude_.resize(points);
        for (std::size_t i = 0; i < points; ++i) amplitude_[i] = (*this)(axis_[i]);
    }

    double operator()(double omega) const { return norm_ * shape(omega); }

    double center() const { return center_; }
    double center_wavelength() const { return center_wavelength_; }
    double fwhm_wavelength() const { return fwhm_m_; }
    double step() const { return step_; }
    const std::vector<double>& axis() const { return axis_; }
    const std::vector<double>& amplitude() const { return amplitude_; }

private:
    double shape(double omega) const {
        const double d = omega - center_;
        return std::exp(-d * d / (4.0 * intensity_sigma_ * intensity_sigma_));
    }

    double center_wavelength_;
    double fwhm_m_;
    double center_ = 0.0;
    double intensity_sigma_ = 0.0;
    double step_ = 0.0;
    double norm_ = 1.0;
    std::vector<double> axis_;
    std::vector<double> amplitude_;
};

struct JsaAxes {
    std::vector<double> signal;  // rad/s
    std::vector<double> idler;
};

struct JSAMatrix {
    std::vector<double> signal;
    std::vector<double> idler;
    Eigen::MatrixXcd values;  // rows: signal, cols: idler
    double length_m = 0.0;
    double power_w = 0.0;
    double pressure_bar = std::numeric_limits<double>::quiet_NaN();
};

struct SchmidtSpectrum {
    std::vector<double> singular_values;  // descending
    std::vector<double> weights;          // lambda_i = s_i^2 / sum s_j^2
    double k = 1.0;
    double g2 = 2.0;
};

inline double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

/// g2 = 1 + 1/K for a mixture of thermal modes with Schmidt number K.
inline double g2_from_k(double k) {
    if (!(k >= 1.0 - 1e-12)) throw DomainError("g2_from_k: Schmidt number must be >= 1, got " + describe(k));
    return 1.0 + 1.0 / std::max(k, 1.0);
}

/// Axes centred on the innermost phase-matched sideband pair. The half-span is
/// three gain half-widths, clipped so the signal axis never reaches into the
/// degeneracy guard around the pump.
template <DispersionLike M>
JsaAxes default_jsa_axes(const M& model, double omega_p, double power_w, std::size_t points = 256,
                         SidebandSearch search = {}) {
    const auto pm = innermost(solve_sidebands(model, omega_p, power_w, search));
    if (!pm) throw DomainError("jsa axes: no phase-matched sidebands at this pump power");
    const double centre = pm->detuning();
    const double top = detail::window_limited_detuning(model, omega_p, search.max_detuning);
    const auto curve = mi_gain_curve(model, omega_p, power_w, linspace(0.0, top, 4001));
    const auto band = gain_band(curve);
    const double half_width = std::max(centre - band.lower, band.upper - centre);
    const double span = std::min({3.0 * half_width, centre - search.guard, top - centre});
    JsaAxes axes;
    axes.signal = linspace(omega_p + centre - span, omega_p + centre + span, points);
    axes.idler = linspace(omega_p - centre - span, omega_p - centre + span, points);
    return axes;
}

/// F(ws, wi) = sum_k E(w1_k) E(ws + wi - w1_k) sinc(dbeta L / 2) dw1 (midpoint rule over the pump grid),
/// dbeta = beta(w1) + beta(ws + wi - w1) - beta(ws) - beta(wi) - 2 gamma P.
template <DispersionLike M>
JSAMatrix build_jsa(const PumpSpectralAmplitude& pump, const M& model, double length_m, double power_w,
                    const JsaAxes& axes, unsigned threads = 1) {
    if (!(length_m >= 0.0)) throw DomainError("build_jsa: length must be >= 0");
    if (axes.signal.empty() || axes.idler.empty()) throw DomainError("build_jsa: empty axes");
    auto check = [&](double w) {
        if (!model.contains(w)) throw DomainError("build_jsa: " + describe(omega_to_thz(w)) + " THz outside the dispersion window");
    };
    for (double w : axes.signal) check(w);
    for (double w : axes.idler) check(w);
    for (double w : pump.axis()) check(w);

    const double spm = 2.0 * model.gamma(pump.center()) * power_w;
    const auto& w1 = pump.axis();
    std::vector<double> beta1(w1.size());
    for (std::size_t k = 0; k < w1.size(); ++k) beta1[k] = model.beta(w1[k]);
    std::vector<double> beta_s(axes.signal.size()), beta_i(axes.idler.size());
    for (std::size_t i = 0; i < axes.signal.size(); ++i) beta_s[i] = model.beta(axes.signal[i]);
    for (std::size_t j = 0; j < axes.idler.size(); ++j) beta_i[j] = model.beta(axes.idler[j]);

    JSAMatrix jsa;
    jsa.signal = axes.signal;
    jsa.idler = axes.idler;
    jsa.length_m = length_m;
    jsa.power_w = power_w;
    if constexpr (requires { model.pressure(); }) jsa.pressure_bar = model.pressure();
    jsa.values.resize(static_cast<Eigen::Index>(axes.signal.size()), static_cast<Eigen::Index>(axes.idler.size()));

    parallel_for(axes.signal.size(), threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            for (std::size_t j = 0; j < axes.idler.size(); ++j) {
                const double sum = axes.signal[i] + axes.idler[j];
                CompensatedSum acc;
                for (std::size_t k = 0; k < w1.size(); ++k) {
                    const double w2 = sum - w1[k];
                    const double e2 = pump(w2);
                    if (e2 == 0.0) continue;
                    const double dbeta = beta1[k] + model.beta(w2) - beta_s[i] - beta_i[j] - spm;
                    acc.add(pump.amplitude()[k] * e2 * sinc(0.5 * dbeta * length_m));
                }
                jsa.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc.value() * pump.step();
            }
        }
    });
    return jsa;
}

inline SchmidtSpectrum schmidt_from_singular_values(std::vector<double> s) {
    std::sort(s.begin(), s.end(), std::greater<>());
    CompensatedSum total;
    for (double x : s) total.add(x * x);
    if (!(total.value() > 0.0)) throw DomainError("schmidt_decompose: zero matrix");
    SchmidtSpectrum out;
    out.weights.resize(s.size());
    CompensatedSum purity;
    for (std::size_t i = 0; i < s.size(); ++i) {
        out.weights[i] = s[i] * s[i] / total.value();
        purity.add(out.weights[i] * out.weights[i]);
    }
    out.singular_values = std::move(s);
    out.k = 1.0 / purity.value();
    out.g2 = g2_from_k(out.k);
    return out;
}

inline SchmidtSpectrum schmidt_decompose(const Eigen::MatrixXcd& f) {
    if (f.size() == 0 || f.norm() == 0.0) throw DomainError("schmidt_decompose: zero matrix");
    if (!f.allFinite()) throw DomainError("schmidt_decompose: non-finite entries");
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(f);
    const auto& sv = svd.singularValues();
    return schmidt_from_singular_values(std::vector<double>(sv.data(), sv.data() + sv.size()));
}

inline SchmidtSpectrum schmidt_decompose(const JSAMatrix& jsa) { return schmidt_decompose(jsa.values); }

struct SchmidtModes {
    Eigen::MatrixXcd signal_modes;  // columns
    Eigen::VectorXd singular_values;
    Eigen::MatrixXcd idler_modes;   // columns; F = U diag(s) V^H
};

inline SchmidtModes schmidt_modes(const Eigen::MatrixXcd& f) {
    if (f.size() == 0 || f.norm() == 0.0) throw DomainError("schmidt_modes: zero matrix");
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(f, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

/// CSV of |F|^2 with the signal frequency (THz) in the first column and the
/// idler axis (THz) as the header row.
inline void write_jsi_csv(std::ostream& os, const JSAMatrix& jsa) {
    os << std::setprecision(10) << "signal_THz\\idler_THz";
    for (double w : jsa.idler) os << ',' << omega_to_thz(w);
    os << '\n';
    for (Eigen::Index i = 0; i < jsa.values.rows(); ++i) {
        os << omega_to_thz(jsa.signal[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < jsa.values.cols(); ++j) os << ',' << std::norm(jsa.values(i, j));
        os << '\n';
    }
}

}  // namespace twinbeam

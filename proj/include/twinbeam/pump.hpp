#pragma once

#include <cmath>

#include "twinbeam/core.hpp"

namespace twinbeam {

/// Gaussian time-bandwidth product for intensity FWHMs.
inline constexpr double kGaussianTimeBandwidth = 0.441271200305303;  // 2 ln2 / pi

/// Peak power of a Gaussian pulse is this factor times E / tau_FWHM (~0.94).
inline double gaussian_peak_factor() { return 2.0 * std::sqrt(std::log(2.0) / kPi); }

/// Spectral FWHM (Hz) of a bandwidth given in wavelength at a centre wavelength.
inline double bandwidth_hz(double center_m, double fwhm_m) {
    return kSpeedOfLight * fwhm_m / (center_m * center_m);
}

/// Transform-limited Gaussian duration for a spectral FWHM given in wavelength.
inline double transform_limited_duration(double center_m, double fwhm_m) {
    return kGaussianTimeBandwidth / bandwidth_hz(center_m, fwhm_m);
}

struct PumpSpec {
    double wavelength_m = 800e-9;
    double energy_j = 250e-9;
    double duration_fwhm_s = 300e-15;
    double bandwidth_fwhm_m = 3.1e-9;  // bandpass-filtered spectrum, used for the JSA
    double rep_rate_hz = 250e3;

    double omega() const { return wavelength_to_omega(wavelength_m); }
    double peak_power() const { return gaussian_peak_factor() * energy_j / duration_fwhm_s; }
    double average_power() const { return energy_j * rep_rate_hz; }

    void validate() const {
        if (!(wavelength_m > 0.0)) throw DomainError("pump: wavelength must be > 0");
        if (!(energy_j > 0.0)) throw DomainError("pump: energy must be > 0");
        if (!(duration_fwhm_s > 0.0)) throw DomainError("pump: duration must be > 0");
        if (!(bandwidth_fwhm_m > 0.0)) throw DomainError("pump: bandwidth must be > 0");
        if (!(rep_rate_hz > 0.0)) throw DomainError("pump: repetition rate must be > 0");
    }
};

inline double peak_power_from_energy(double energy_j, double duration_fwhm_s) {
    return gaussian_peak_factor() * energy_j / duration_fwhm_s;
}

}  // namespace twinbeam

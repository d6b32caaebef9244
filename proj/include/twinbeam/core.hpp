#pragma once

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>

namespace twinbeam {

inline constexpr double kSpeedOfLight = 299792458.0;     // m/s
inline constexpr double kHbar = 1.054571817e-34;         // J s
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Raised when an argument falls outside the physical or numerical domain of a model.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

inline double wavelength_to_omega(double wavelength_m) { return kTwoPi * kSpeedOfLight / wavelength_m; }
inline double omega_to_wavelength(double omega) { return kTwoPi * kSpeedOfLight / omega; }
inline double omega_to_thz(double omega) { return omega / kTwoPi * 1e-12; }
inline double thz_to_omega(double thz) { return thz * 1e12 * kTwoPi; }

inline std::string describe(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", value);
    return buf;
}

}  // namespace twinbeam

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "twinbeam/core.hpp"
#include "twinbeam/numerics.hpp"

namespace twinbeam {

/// One term B * lambda^2 / (lambda^2 - C) of a Sellmeier expansion of n^2 - 1,
/// with lambda in micrometres (C in um^2).
struct SellmeierTerm {
    double b = 0.0;
    double c_um2 = 0.0;
};

/// Filling gas: Sellmeier fit of (n^2 - 1) and Kerr index at a reference density.
struct GasSpec {
    std::string species = "argon";
    std::vector<SellmeierTerm> sellmeier;
    double p_ref_bar = 1.0;
    double t_ref_k = 273.0;
    double n2_ref = 0.0;               // m^2/W at the reference density
    double lambda_min_m = 400e-9;      // Sellmeier validity window
    double lambda_max_m = 1200e-9;

    /// n^2 - 1 at the reference density.
    double susceptibility_ref(double wavelength_m) const {
        const double l2 = (wavelength_m * 1e6) * (wavelength_m * 1e6);
        double chi = 0.0;
        for (const auto& t : sellmeier) chi += t.b * l2 / (l2 - t.c_um2);
        return chi;
    }

    bool in_window(double wavelength_m) const {
        return wavelength_m >= lambda_min_m && wavelength_m <= lambda_max_m;
    }

    void validate() const {
        if (sellmeier.empty()) throw DomainError("gas '" + species + "': empty Sellmeier table");
        if (!(p_ref_bar > 0.0) || !(t_ref_k > 0.0)) throw DomainError("gas '" + species + "': reference state must be positive");
        if (!(n2_ref > 0.0)) throw DomainError("gas '" + species + "': n2_ref must be > 0");
        if (!(lambda_min_m > 0.0) || !(lambda_max_m > lambda_min_m)) {
            throw DomainError("gas '" + species + "': invalid validity window");
        }
        for (double l : linspace(lambda_min_m, lambda_max_m, 64)) {
            if (!(susceptibility_ref(l) > 0.0)) {
                throw DomainError("gas '" + species + "': n <= 1 at " + describe(l * 1e9) + " nm");
            }
        }
    }
};

/// Ideal-gas density ratio rho / rho_ref.
inline double density_ratio(const GasSpec& gas, double pressure_bar, double temperature_k) {
    return (pressure_bar / gas.p_ref_bar) * (gas.t_ref_k / temperature_k);
}

inline double refractive_index(const GasSpec& gas, double wavelength_m, double pressure_bar, double temperature_k) {
    if (!gas.in_window(wavelength_m)) {
        throw DomainError("wavelength " + describe(wavelength_m * 1e9) + " nm outside the " + gas.species +
                          " Sellmeier window [" + describe(gas.lambda_min_m * 1e9) + ", " +
                          describe(gas.lambda_max_m * 1e9) + "] nm");
    }
    if (!(pressure_bar >= 0.0)) throw DomainError("pressure must be >= 0 bar");
    if (!(temperature_k > 0.0)) throw DomainError("temperature must be > 0 K");
    return std::sqrt(1.0 + gas.susceptibility_ref(wavelength_m) * density_ratio(gas, pressure_bar, temperature_k));
}

/// Piecewise-linear attenuation table, constant beyond its end points.
class LossTable {
public:
    struct Entry {
        double wavelength_m;
        double db_per_m;
    };

    LossTable() = default;
    explicit LossTable(std::vector<Entry> entries) : entries_(std::move(entries)) {
        std::sort(entries_.begin(), entries_.end(),
                  [](const Entry& a, const Entry& b) { return a.wavelength_m < b.wavelength_m; });
        for (const auto& e : entries_) {
            if (!(e.db_per_m >= 0.0)) throw DomainError("loss table: attenuation must be >= 0 dB/m");
        }
    }

    double db_per_m(double wavelength_m) const {
        if (entries_.empty()) return 0.0;
        if (wavelength_m <= entries_.front().wavelength_m) return entries_.front().db_per_m;
        if (wavelength_m >= entries_.back().wavelength_m) return entries_.back().db_per_m;
        auto hi = std::upper_bound(entries_.begin(), entries_.end(), wavelength_m,
                                   [](double l, const Entry& e) { return l < e.wavelength_m; });
        auto lo = hi - 1;
        const double f = (wavelength_m - lo->wavelength_m) / (hi->wavelength_m - lo->wavelength_m);
        return lo->db_per_m + f * (hi->db_per_m - lo->db_per_m);
    }

    const std::vector<Entry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

private:
    std::vector<Entry> entries_;
};

/// Kagome hollow core approximated as a capillary.
struct FiberGeometry {
    double flat_to_flat_m = 18.5e-6;
    double wall_m = 240e-9;
    double s_parameter = 0.03;
    double length_m = 0.30;
    double mode_area_factor = 0.48;  // A_eff / (pi a_AP^2) for the fundamental capillary mode
    LossTable loss;

    /// Radius of the circle with the same area as the regular hexagon.
    double area_preserving_radius() const {
        return flat_to_flat_m * std::sqrt(std::sqrt(3.0) / (2.0 * kPi));
    }

    double effective_radius(double wavelength_m) const {
        const double a = area_preserving_radius();
        if (std::isinf(a)) return a;
        return a / (1.0 + s_parameter * wavelength_m * wavelength_m / (a * wall_m));
    }

    double effective_area() const {
        const double a = area_preserving_radius();
        return mode_area_factor * kPi * a * a;
    }

    void validate() const {
        if (!(flat_to_flat_m > 0.0)) throw DomainError("fiber: core diameter must be > 0");
        if (!(wall_m > 0.0)) throw DomainError("fiber: wall thickness must be > 0");
        if (!(s_parameter >= 0.0 && s_parameter < 1.0)) throw DomainError("fiber: s-parameter must lie in [0, 1)");
        if (!(length_m > 0.0) || std::isinf(length_m)) throw DomainError("fiber: length must be > 0");
        if (!(mode_area_factor > 0.0)) throw DomainError("fiber: mode area factor must be > 0");
    }
};

/// Anything that supplies a propagation constant and Kerr coefficient on a
/// frequency window: the capillary model below, or synthetic test models.
template <class M>
concept DispersionLike = requires(const M& m, double omega) {
    { m.beta(omega) } -> std::convertible_to<double>;
    { m.gamma(omega) } -> std::convertible_to<double>;
    { m.contains(omega) } -> std::convertible_to<bool>;
};

/// Capillary model of a gas-filled kagome fibre with the s-parameter
/// correction to the core radius.
class DispersionModel {
public:
    static constexpr double kModeConstant = 2.404825557695773;  // first zero of J0

    DispersionModel(GasSpec gas, FiberGeometry fiber, double pressure_bar, double temperature_k = 293.0)
        : gas_(std::move(gas)), fiber_(std::move(fiber)), pressure_bar_(pressure_bar), temperature_k_(temperature_k) {
        gas_.validate();
        fiber_.validate();
        if (!(pressure_bar_ >= 0.0)) throw DomainError("pressure must be >= 0 bar");
        if (!(temperature_k_ > 0.0)) throw DomainError("temperature must be > 0 K");
        density_ratio_ = density_ratio(gas_, pressure_bar_, temperature_k_);
    }

    const GasSpec& gas() const { return gas_; }
    const FiberGeometry& fiber() const { return fiber_; }
    double pressure() const { return pressure_bar_; }
    double temperature() const { return temperature_k_; }
    double density() const { return density_ratio_; }

    double omega_min() const { return wavelength_to_omega(gas_.lambda_max_m); }
    double omega_max() const { return wavelength_to_omega(gas_.lambda_min_m); }
    bool contains(double omega) const { return omega >= omega_min() && omega <= omega_max(); }

    double index(double wavelength_m) const {
        return refractive_index(gas_, wavelength_m, pressure_bar_, temperature_k_);
    }

    /// beta(omega) = sqrt(n^2 omega^2 / c^2 - u01^2 / a_eff^2), rad/m.
    double beta(double omega) const {
        const double lambda = omega_to_wavelength(omega);
        const double k = index(lambda) * omega / kSpeedOfLight;
        const double a = fiber_.effective_radius(lambda);
        const double kt = kModeConstant / a;
        const double arg = k * k - kt * kt;
        if (!(arg > 0.0)) {
            throw DomainError("below waveguide cutoff at " + describe(lambda * 1e9) + " nm");
        }
        return std::sqrt(arg);
    }

    /// Kerr coefficient with A_eff frozen at the fundamental-mode value.
    double gamma(double omega) const {
        return gas_.n2_ref * density_ratio_ * omega / (fiber_.effective_area() * kSpeedOfLight);
    }

    double loss_db_per_m(double omega) const { return fiber_.loss.db_per_m(omega_to_wavelength(omega)); }

private:
    GasSpec gas_;
    FiberGeometry fiber_;
    double pressure_bar_;
    double temperature_k_;
    double density_ratio_ = 0.0;
};

/// Taylor-series dispersion about a reference frequency with constant gamma.
/// Used as a synthetic model with closed-form phase matching.
class PolynomialDispersion {
public:
    PolynomialDispersion(double omega0, std::vector<double> coefficients, double gamma,
                         double omega_min = 0.0, double omega_max = std::numeric_limits<double>::infinity())
        : omega0_(omega0), coefficients_(std::move(coefficients)), gamma_(gamma), omega_min_(omega_min), omega_max_(omega_max) {}

    double beta(double omega) const {
        const double d = omega - omega0_;
        // Horner on beta_k d^k / k!
        double acc = 0.0;
        for (std::size_t k = coefficients_.size(); k-- > 0;) {
            acc = coefficients_[k] + acc * d / static_cast<double>(k + 1);
        }
        return acc;
    }
    double gamma(double) const { return gamma_; }
    double omega_min() const { return omega_min_; }
    double omega_max() const { return omega_max_; }
    bool contains(double omega) const { return omega >= omega_min_ && omega <= omega_max_; }
    double loss_db_per_m(double) const { return 0.0; }

    double omega0() const { return omega0_; }
    const std::vector<double>& coefficients() const { return coefficients_; }

private:
    double omega0_;
    std::vector<double> coefficients_;  // beta_0, beta_1, beta_2, ...
    double gamma_;
    double omega_min_;
    double omega_max_;
};

struct DerivativeOptions {
    double relative_step = 1e-4;
    int stencil = 5;  // 3 or 5 points
};

template <DispersionLike M>
double propagation_constant(const M& model, double omega) {
    if (!model.contains(omega)) throw DomainError("frequency " + describe(omega_to_thz(omega)) + " THz outside the model window");
    return model.beta(omega);
}

/// Central finite-difference beta_1 (s/m) or beta_2 (s^2/m).
template <DispersionLike M>
double beta_derivative(const M& model, double omega, int order, DerivativeOptions opt = {}) {
    if (order != 1 && order != 2) throw DomainError("beta_derivative: order must be 1 or 2");
    if (opt.stencil != 3 && opt.stencil != 5) throw DomainError("beta_derivative: stencil must be 3 or 5");
    const double h = opt.relative_step * omega;
    const int reach = opt.stencil == 5 ? 2 : 1;
    if (!model.contains(omega - reach * h) || !model.contains(omega + reach * h)) {
        throw DomainError("derivative stencil around " + describe(omega_to_thz(omega)) + " THz leaves the model window");
    }
    const double f0 = model.beta(omega);
    const double fp1 = model.beta(omega + h);
    const double fm1 = model.beta(omega - h);
    if (opt.stencil == 3) {
        return order == 1 ? (fp1 - fm1) / (2.0 * h) : (fp1 - 2.0 * f0 + fm1) / (h * h);
    }
    const double fp2 = model.beta(omega + 2.0 * h);
    const double fm2 = model.beta(omega - 2.0 * h);
    if (order == 1) return (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h);
    return (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h);
}

template <DispersionLike M>
double beta2_at_wavelength(const M& model, double wavelength_m, DerivativeOptions opt = {}) {
    return beta_derivative(model, wavelength_to_omega(wavelength_m), 2, opt);
}

struct ZdwOptions {
    int scan_points = 200;
    double tolerance_m = 1e-12;
    DerivativeOptions derivative{};
};

/// Zero-dispersion wavelength inside [lambda_min, lambda_max]. Requires exactly
/// one sign change of beta_2 on the scan grid.
template <DispersionLike M>
double find_zdw(const M& model, double lambda_min_m, double lambda_max_m, ZdwOptions opt = {}) {
    if (!(lambda_max_m > lambda_min_m)) throw DomainError("find_zdw: empty search window");
    const auto grid = linspace(lambda_min_m, lambda_max_m, static_cast<std::size_t>(std::max(opt.scan_points, 2)));
    std::vector<double> b2(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) b2[i] = beta2_at_wavelength(model, grid[i], opt.derivative);

    std::vector<std::size_t> changes;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        if (b2[i] == 0.0) return grid[i];
        if ((b2[i] < 0.0) != (b2[i + 1] < 0.0)) changes.push_back(i);
    }
    const std::string window = "[" + describe(lambda_min_m * 1e9) + ", " + describe(lambda_max_m * 1e9) + "] nm";
    if (changes.empty()) throw DomainError("no zero-dispersion wavelength in " + window);
    if (changes.size() > 1) {
        throw DomainError("beta_2 changes sign " + std::to_string(changes.size()) + " times in " + window);
    }
    const std::size_t i = changes.front();
    return bisect([&](double l) { return beta2_at_wavelength(model, l, opt.derivative); }, grid[i], grid[i + 1],
                  opt.tolerance_m);
}

/// beta_1(a) - beta_1(b), s/m.
template <DispersionLike M>
double group_walkoff(const M& model, double omega_a, double omega_b, DerivativeOptions opt = {}) {
    if (omega_a == omega_b) return 0.0;
    return beta_derivative(model, omega_a, 1, opt) - beta_derivative(model, omega_b, 1, opt);
}

template <DispersionLike M>
double nonlinear_coefficient(const M& model, double omega) {
    if (!model.contains(omega)) throw DomainError("frequency " + describe(omega_to_thz(omega)) + " THz outside the model window");
    return model.gamma(omega);
}

}  // namespace twinbeam

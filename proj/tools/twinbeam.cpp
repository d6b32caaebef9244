// Command-line front end: one subcommand per pipeline stage, every run
// leaves a manifest.json from which `twinbeam replay` regenerates its outputs.

#include <bit>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#if __has_include("CLI11.hpp")
#include "CLI11.hpp"
#else
#include <CLI/CLI.hpp>
#endif

#include "twinbeam/config.hpp"
#include "twinbeam/gas_dispersion.hpp"
#include "twinbeam/gnlse.hpp"
#include "twinbeam/jsa_schmidt.hpp"
#include "twinbeam/phase_matching.hpp"
#include "twinbeam/photon_statistics.hpp"
#include "twinbeam/pump.hpp"

#ifndef TWINBEAM_VERSION
#define TWINBEAM_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace twinbeam;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    std::ofstream open(const std::string& name, bool binary = false) {
        names_.push_back(name);
        std::ofstream os(dir_ / name, binary ? std::ios::binary : std::ios::out);
        if (!os) throw std::runtime_error("cannot write " + (dir_ / name).string());
        return os;
    }

    void json(const std::string& name, const Json& value) { open(name) << value.dump(2) << '\n'; }

    const std::vector<std::string>& names() const { return names_; }
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    std::vector<std::string> names_;
};

template <class T>
T cfg_get(const Json& cfg, const std::string& pointer) {
    const Json::json_pointer ptr(pointer);
    if (!cfg.contains(ptr)) throw ConfigError("missing config entry " + pointer);
    try {
        return cfg.at(ptr).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError("config entry " + pointer + ": " + e.what());
    }
}

void write_gnuplot(Outputs& out, const std::string& name, const std::string& body) {
    out.open(name) << "set datafile separator ','\nset key autotitle columnhead\n" << body;
}

// --- dispersion ------------------------------------------------------------

Json run_dispersion(const Json& cfg, Outputs& out, unsigned threads) {
    const auto model = model_from_config(cfg);
    const auto pump = pump_from_config(cfg);
    const double lo = cfg_get<double>(cfg, "/dispersion/lambda_min_nm") * 1e-9;
    const double hi = cfg_get<double>(cfg, "/dispersion/lambda_max_nm") * 1e-9;
    const auto points = cfg_get<std::size_t>(cfg, "/dispersion/points");
    if (points < 2) throw ConfigError("dispersion.points must be >= 2");

    {
        auto os = out.open("dispersion.csv");
        os << "wavelength_nm,index,beta_rad_per_m,beta2_fs2_per_cm,gamma_per_W_per_m\n" << std::setprecision(12);
        for (double l : linspace(lo, hi, points)) {
            const double w = wavelength_to_omega(l);
            os << l * 1e9 << ',' << model.index(l) << ',' << model.beta(w) << ','
               << beta2_at_wavelength(model, l) * 1e30 / 100.0 << ',' << model.gamma(w) << '\n';
        }
    }

    Json summary;
    summary["pressure_bar"] = model.pressure();
    summary["zdw_nm"] = find_zdw(model, lo, hi) * 1e9;
    summary["beta2_pump_fs2_per_cm"] = beta2_at_wavelength(model, pump.wavelength_m) * 1e30 / 100.0;
    summary["gamma_pump_per_W_per_m"] = model.gamma(pump.omega());
    summary["core_radius_um"] = model.fiber().area_preserving_radius() * 1e6;
    summary["effective_area_um2"] = model.fiber().effective_area() * 1e12;

    const auto pressures = cfg_get<std::vector<double>>(cfg, "/dispersion/zdw_pressures_bar");
    if (!pressures.empty()) {
        std::vector<double> zdw(pressures.size());
        const auto gas = gas_from_config(cfg);
        const auto fiber = fiber_from_config(cfg);
        const double temp = temperature_from_config(cfg);
        parallel_for(pressures.size(), threads, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) zdw[i] = find_zdw(DispersionModel(gas, fiber, pressures[i], temp), lo, hi);
        });
        auto os = out.open("zdw.csv");
        os << "pressure_bar,zdw_nm\n" << std::setprecision(12);
        for (std::size_t i = 0; i < pressures.size(); ++i) os << pressures[i] << ',' << zdw[i] * 1e9 << '\n';
    }
    if (cfg_get<bool>(cfg, "/output/gnuplot")) {
        write_gnuplot(out, "dispersion.gp",
                      "set xlabel 'wavelength (nm)'\nset ylabel 'beta2 (fs^2/cm)'\n"
                      "plot 'dispersion.csv' using 1:4 with lines\n");
    }
    return summary;
}

// --- phase matching ---------------------------------------------------------

Json run_phasematch(const Json& cfg, Outputs& out, unsigned threads) {
    const auto gas = gas_from_config(cfg);
    const auto fiber = fiber_from_config(cfg);
    const double temp = temperature_from_config(cfg);
    const double pressure = pressure_from_config(cfg);
    const auto pump = pump_from_config(cfg);
    const auto search = search_from_config(cfg);
    const auto sweep = cfg_get<std::string>(cfg, "/phasematch/sweep");

    std::vector<SweepEntry> entries;
    std::string column;
    if (sweep == "pressure") {
        column = "pressure_bar";
        auto pressures = cfg_get<std::vector<double>>(cfg, "/phasematch/pressures_bar");
        if (pressures.empty()) throw ConfigError("pressure sweep needs phasematch.pressures_bar");
        entries = pressure_sweep(gas, fiber, temp, pump.omega(), pump.peak_power(), pressures, search, threads);
    } else if (sweep == "power") {
        column = "power_W";
        std::vector<double> powers;
        for (double e : cfg_get<std::vector<double>>(cfg, "/phasematch/energies_nJ")) {
            powers.push_back(peak_power_from_energy(e * 1e-9, pump.duration_fwhm_s));
        }
        if (powers.empty()) throw ConfigError("power sweep needs phasematch.energies_nJ");
        entries = power_sweep(DispersionModel(gas, fiber, pressure, temp), pump.omega(), powers, search, threads);
    } else if (sweep == "none") {
        column = "pressure_bar";
        const DispersionModel model(gas, fiber, pressure, temp);
        entries.push_back({pressure, solve_sidebands(model, pump.omega(), pump.peak_power(), search)});
    } else {
        throw ConfigError("phasematch.sweep must be none, pressure or power");
    }
    {
        auto os = out.open("phasematch.csv");
        write_sweep_csv(os, column, entries);
    }

    const DispersionModel model(gas, fiber, pressure, temp);
    const double top = detail::window_limited_detuning(model, pump.omega(), search.max_detuning);
    const auto curve = mi_gain_curve(model, pump.omega(), pump.peak_power(), linspace(0.0, top, 2001));
    {
        auto os = out.open("mi_gain.csv");
        os << "detuning_THz,gain_per_m\n" << std::setprecision(12);
        for (std::size_t i = 0; i < curve.detuning.size(); ++i) {
            os << omega_to_thz(curve.detuning[i]) << ',' << curve.gain[i] << '\n';
        }
    }
    Json summary;
    summary["pressure_bar"] = pressure;
    summary["energy_nJ"] = pump.energy_j * 1e9;
    summary["peak_power_W"] = pump.peak_power();
    const auto gain = parametric_gain(curve, fiber.length_m);
    summary["parametric_gain"] = gain.gain;
    summary["photons_per_mode"] = gain.mean_photons;
    if (const auto pm = innermost(entries.back().sidebands); pm && sweep == "none") {
        summary["signal_THz"] = omega_to_thz(pm->signal_omega);
        summary["idler_THz"] = omega_to_thz(pm->idler_omega);
        summary["idler_nm"] = omega_to_wavelength(pm->idler_omega) * 1e9;
        const auto band = gain_band(curve);
        summary["gain_fwhm_THz"] = omega_to_thz(band.fwhm());
    }
    if (cfg_get<bool>(cfg, "/output/gnuplot")) {
        write_gnuplot(out, "phasematch.gp",
                      "set xlabel '" + column + "'\nset ylabel 'frequency (THz)'\n"
                      "plot 'phasematch.csv' using 1:2 with points title 'signal', '' using 1:3 with points title 'idler'\n");
    }
    return summary;
}

// --- GNLSE ------------------------------------------------------------------

Json run_mi_spectrum(const Json& cfg, Outputs& out, unsigned threads) {
    const auto model = model_from_config(cfg);
    const auto pump = pump_from_config(cfg);
    const auto grid = grid_from_config(cfg);
    auto prop = propagation_from_config(cfg);
    prop.threads = threads;
    const double length = model.fiber().length_m;

    const auto spec = ensemble_spectrum(pump, model, length, grid, prop);
    {
        auto os = out.open("spectrum.csv");
        write_spectrum_csv(os, spec);
    }
    if (!spec.snapshots.empty()) {
        auto os = out.open("evolution.csv");
        write_evolution_csv(os, spec);
    }

    const double pump_thz = omega_to_thz(pump.omega());
    const double excl = cfg_get<double>(cfg, "/spectrum/exclusion_THz");
    const double max_det = cfg_get<double>(cfg, "/spectrum/max_detuning_THz");
    const double smooth = cfg_get<double>(cfg, "/spectrum/smoothing_THz");
    Json summary;
    summary["shots"] = spec.shots;
    summary["seed"] = spec.seed;
    for (int side : {+1, -1}) {
        const auto m = measure_sideband(spec, pump_thz, side, excl, max_det, smooth);
        Json s;
        s["found"] = m.found;
        if (m.found) {
            s["peak_THz"] = m.peak_thz;
            s["detuning_THz"] = m.detuning_thz;
            s["width_3dB_THz"] = m.width_3db_thz;
            s["peak_dB"] = m.peak_db;
        }
        summary[side > 0 ? "blue_sideband" : "red_sideband"] = s;
    }
    const auto search = search_from_config(cfg);
    if (const auto pm = innermost(solve_sidebands(model, pump.omega(), pump.peak_power(), search))) {
        summary["predicted_detuning_THz"] = omega_to_thz(pm->detuning());
    }
    if (cfg_get<bool>(cfg, "/output/gnuplot")) {
        write_gnuplot(out, "spectrum.gp",
                      "set xlabel 'frequency (THz)'\nset ylabel 'PSD (dB)'\nset yrange [-80:0]\n"
                      "plot 'spectrum.csv' using 1:3 with lines\n");
    }
    return summary;
}

// --- JSA / Schmidt ------------------------------------------------------------

void write_f64_le(std::ostream& os, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    os.write(bytes, 8);
}

Json run_jsa(const Json& cfg, Outputs& out, unsigned threads) {
    const double pressure = cfg_get<double>(cfg, "/jsa/pressure_bar");
    const DispersionModel model(gas_from_config(cfg), fiber_from_config(cfg), pressure, temperature_from_config(cfg));
    const auto pump = pump_from_config(cfg);
    const double length = model.fiber().length_m;
    const double wp = pump.omega();

    // The pump power is either fixed by the configured gain G = gamma P L or taken from the pulse energy.
    double power = pump.peak_power();
    const Json::json_pointer gain_ptr("/jsa/gain");
    if (cfg.contains(gain_ptr) && !cfg.at(gain_ptr).is_null()) {
        power = cfg_get<double>(cfg, "/jsa/gain") / (model.gamma(wp) * length);
    }
    const auto points = cfg_get<std::size_t>(cfg, "/jsa/points");
    const auto pump_points = cfg_get<std::size_t>(cfg, "/jsa/pump_points");
    const PumpSpectralAmplitude amplitude(pump.wavelength_m, pump.bandwidth_fwhm_m, pump_points);
    const auto axes = default_jsa_axes(model, wp, power, points, search_from_config(cfg));
    const auto jsa = build_jsa(amplitude, model, length, power, axes, threads);
    const auto schmidt = schmidt_decompose(jsa);

    const auto dump = cfg_get<std::string>(cfg, "/jsa/dump");
    if (dump == "csv") {
        auto os = out.open("jsi.csv");
        write_jsi_csv(os, jsa);
    } else if (dump == "binary") {
        auto os = out.open("jsi.bin", true);
        for (Eigen::Index i = 0; i < jsa.values.rows(); ++i) {
            for (Eigen::Index j = 0; j < jsa.values.cols(); ++j) write_f64_le(os, std::norm(jsa.values(i, j)));
        }
    } else if (dump != "none") {
        throw ConfigError("jsa.dump must be csv, binary or none");
    }

    Json summary;
    summary["K"] = schmidt.k;
    summary["g2"] = schmidt.g2;
    std::vector<double> lambdas(schmidt.weights.begin(),
                                schmidt.weights.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(10, schmidt.weights.size())));
    summary["lambdas"] = lambdas;
    summary["pressure_bar"] = pressure;
    summary["power_W"] = power;
    summary["parametric_gain"] = model.gamma(wp) * power * length;
    summary["rows"] = jsa.values.rows();
    summary["cols"] = jsa.values.cols();
    summary["signal_THz"] = {omega_to_thz(axes.signal.front()), omega_to_thz(axes.signal.back())};
    summary["idler_THz"] = {omega_to_thz(axes.idler.front()), omega_to_thz(axes.idler.back())};
    out.json("jsa_summary.json", summary);
    if (cfg_get<bool>(cfg, "/output/gnuplot") && dump == "csv") {
        write_gnuplot(out, "jsi.gp",
                      "set view map\nset xlabel 'idler column'\nset ylabel 'signal row'\n"
                      "plot 'jsi.csv' matrix every ::1:1 with image\n");
    }
    return summary;
}

// --- photon statistics -----------------------------------------------------

Json nrf_json(const NRFResult& r) {
    return {{"nrf", r.nrf}, {"std_error", r.std_error}, {"mean_total", r.mean_total}, {"pulses", r.pulses}};
}

Json g2_json(const G2Result& r) {
    Json j{{"g2", r.g2}, {"std_error", r.std_error}, {"mean", r.mean}, {"k_unbounded", r.k_unbounded}};
    j["K"] = r.k_unbounded ? Json(nullptr) : Json(r.k);
    return j;
}

Json run_stats(const Json& cfg, Outputs& out, unsigned threads) {
    const auto modes = modes_from_config(cfg);
    const auto pulses = cfg_get<std::size_t>(cfg, "/stats/pulses");
    const CounterRng rng(cfg_get<std::uint64_t>(cfg, "/seed"), 0x73746174u);
    const auto det_s = detector_from_json(cfg.at(Json::json_pointer("/stats/detector_s")));
    const auto det_i = detector_from_json(cfg.at(Json::json_pointer("/stats/detector_i")));
    auto opt = nrf_options_from_config(cfg);

    const auto generated = sample_twin_beam(modes, pulses, rng.substream(0), threads);
    const auto lossy = apply_loss(generated, cfg_get<double>(cfg, "/stats/eta_s"), cfg_get<double>(cfg, "/stats/eta_i"),
                                  rng.substream(1), threads);
    const auto detected = detect(lossy, det_s, det_i, rng.substream(2), threads);

    Json summary;
    summary["modes"] = modes.mean_photons;
    summary["pulses"] = pulses;
    opt.subtract_noise = false;
    summary["lossy"] = nrf_json(estimate_nrf(lossy, opt));
    summary["detected"] = nrf_json(estimate_nrf(detected, opt));
    opt.subtract_noise = true;
    summary["calibrated"] = nrf_json(estimate_nrf(detected, opt));
    summary["g2_signal"] = g2_json(estimate_g2(generated, Channel::signal, opt.bootstrap));
    summary["g2_idler"] = g2_json(estimate_g2(generated, Channel::idler, opt.bootstrap));
    summary["g2_signal_detected"] = g2_json(estimate_g2(detected, Channel::signal, opt.bootstrap));
    out.json("stats.json", summary);
    if (cfg_get<bool>(cfg, "/stats/raw_dump")) {
        auto os = out.open("counts_lossy.u32", true);
        write_raw_counts(os, lossy);
    }
    return summary;
}

Json run_calibrate(const Json& cfg, Outputs& out, unsigned threads) {
    const auto ratios = cfg_get<std::vector<double>>(cfg, "/stats/calibration/ratios");
    const auto means = cfg_get<std::vector<double>>(cfg, "/stats/calibration/mean_totals");
    const auto pulses = cfg_get<std::size_t>(cfg, "/stats/pulses");
    const auto det_s = detector_from_json(cfg.at(Json::json_pointer("/stats/detector_s")));
    const auto det_i = detector_from_json(cfg.at(Json::json_pointer("/stats/detector_i")));
    const CounterRng rng(cfg_get<std::uint64_t>(cfg, "/seed"), 0x63616c69u);
    const auto cal = calibrate_shot_noise(ratios, means, pulses, det_s, det_i, rng, threads);
    {
        auto os = out.open("calibration.csv");
        os << "ratio,mean_total,variance,raw_nrf,calibrated_nrf\n" << std::setprecision(12);
        for (const auto& p : cal.points) {
            os << p.ratio << ',' << p.mean_total << ',' << p.variance << ',' << p.raw_nrf << ',' << p.calibrated_nrf << '\n';
        }
    }
    Json summary{{"slope", cal.fit.slope},          {"slope_se", cal.fit.slope_se},
                 {"intercept", cal.fit.intercept},  {"intercept_se", cal.fit.intercept_se},
                 {"r_squared", cal.fit.r_squared},
                 {"expected_intercept", det_s.sigma_photons * det_s.sigma_photons + det_i.sigma_photons * det_i.sigma_photons}};
    if (cfg_get<bool>(cfg, "/output/gnuplot")) {
        write_gnuplot(out, "calibration.gp",
                      "set xlabel '<N_s + N_i>'\nset ylabel 'Var(N_s - N_i)'\n"
                      "plot 'calibration.csv' using 2:3 with points\n");
    }
    return summary;
}

Json run_loss_budget(const Json& cfg, Outputs&, unsigned) {
    const Json::json_pointer ptr("/loss_budget");
    if (!cfg.contains(ptr)) throw ConfigError("loss-budget needs --file or a loss_budget config section");
    const auto r = loss_budget(loss_budget_from_json(cfg.at(ptr)));
    return {{"eta", r.eta_total},          {"eta_signal", r.eta_signal}, {"eta_idler", r.eta_idler},
            {"nrf_best", r.nrf_best},      {"nrf_best_dB", r.nrf_best_db}};
}

Json run_nrf_sweep(const Json& cfg, Outputs& out, unsigned threads) {
    const auto kind = cfg_get<std::string>(cfg, "/stats/sweep");
    const auto pulses = cfg_get<std::size_t>(cfg, "/stats/pulses");
    const CounterRng rng(cfg_get<std::uint64_t>(cfg, "/seed"), 0x73776570u);
    const auto opt = nrf_options_from_config(cfg);
    const bool plot = cfg_get<bool>(cfg, "/output/gnuplot");
    auto fit_json = [](const LinearFit& f) {
        return Json{{"slope", f.slope}, {"slope_se", f.slope_se}, {"intercept", f.intercept},
                    {"intercept_se", f.intercept_se}, {"r_squared", f.r_squared}};
    };

    if (kind == "attenuation") {
        const auto modes = modes_from_config(cfg);
        const double base = cfg_get<double>(cfg, "/stats/attenuation/base_eta");
        const auto extra = cfg_get<std::vector<double>>(cfg, "/stats/attenuation/extra_eta");
        const auto sweep = attenuation_sweep(base, extra, modes, pulses, rng, threads, opt);
        {
            auto os = out.open("nrf_attenuation.csv");
            os << "extra_eta,total_eta,valid,nrf,std_error,mean_total\n" << std::setprecision(12);
            for (const auto& p : sweep.points) {
                os << p.extra_eta << ',' << p.total_eta << ',' << (p.valid ? 1 : 0) << ',' << p.nrf.nrf << ','
                   << p.nrf.std_error << ',' << p.nrf.mean_total << '\n';
            }
        }
        if (plot) {
            write_gnuplot(out, "nrf_attenuation.gp",
                          "set xlabel 'extra transmission'\nset ylabel 'NRF'\n"
                          "plot 'nrf_attenuation.csv' using 1:4:5 with yerrorbars\n");
        }
        return {{"kind", kind}, {"fit", fit_json(sweep.fit)}, {"nrf_full_block_from_fit", sweep.fit(0.0)},
                {"nrf_unattenuated_from_fit", sweep.fit(1.0)}, {"expected_unattenuated", 1.0 - base}};
    }
    if (kind == "brightness") {
        BrightnessConfig bc;
        const auto weights = weights_from_config(cfg.at("stats"));
        bc.singular_values.clear();
        for (double w : weights) bc.singular_values.push_back(std::sqrt(w));
        bc.gains = cfg_get<std::vector<double>>(cfg, "/stats/brightness/gains");
        bc.max_modes = cfg_get<std::size_t>(cfg, "/stats/brightness/max_modes");
        for (const auto& pair : cfg_get<std::vector<std::vector<double>>>(cfg, "/stats/brightness/mode_efficiency")) {
            if (pair.size() != 2) throw ConfigError("brightness.mode_efficiency entries must be [eta_s, eta_i]");
            bc.mode_efficiency.push_back({pair[0], pair[1]});
        }
        bc.eta_s = cfg_get<double>(cfg, "/stats/eta_s");
        bc.eta_i = cfg_get<double>(cfg, "/stats/eta_i");
        bc.detector_s = detector_from_json(cfg.at(Json::json_pointer("/stats/detector_s")));
        bc.detector_i = detector_from_json(cfg.at(Json::json_pointer("/stats/detector_i")));
        bc.pulses = pulses;
        bc.nrf = opt;
        const auto sweep = brightness_sweep(bc, rng, threads);
        {
            auto os = out.open("nrf_brightness.csv");
            os << "gain,photons_per_mode,mean_total,nrf_lossy,se_lossy,nrf_detected,se_detected,nrf_calibrated,se_calibrated\n"
               << std::setprecision(12);
            for (const auto& p : sweep.points) {
                os << p.gain << ',' << p.photons_per_mode << ',' << p.calibrated.mean_total << ',' << p.lossy.nrf << ','
                   << p.lossy.std_error << ',' << p.detected.nrf << ',' << p.detected.std_error << ','
                   << p.calibrated.nrf << ',' << p.calibrated.std_error << '\n';
            }
        }
        if (plot) {
            write_gnuplot(out, "nrf_brightness.gp",
                          "set xlabel '<N_s + N_i>'\nset ylabel 'NRF'\n"
                          "plot 'nrf_brightness.csv' using 3:8:9 with yerrorbars\n");
        }
        Json summary{{"kind", kind}};
        if (sweep.points.size() >= 2) summary["fit"] = fit_json(sweep.fit);
        return summary;
    }
    throw ConfigError("stats.sweep must be attenuation or brightness");
}

using Runner = Json (*)(const Json&, Outputs&, unsigned);

const std::map<std::string, Runner>& runners() {
    static const std::map<std::string, Runner> table{
        {"dispersion", run_dispersion}, {"phasematch", run_phasematch}, {"mi-spectrum", run_mi_spectrum},
        {"jsa", run_jsa},               {"stats", run_stats},           {"calibrate", run_calibrate},
        {"loss-budget", run_loss_budget}, {"nrf-sweep", run_nrf_sweep}};
    return table;
}

/// Command-line overrides, each mapped onto one config entry.
struct Override {
    std::string pointer;
    std::optional<double> number;
    std::optional<std::string> text;
    std::optional<std::vector<double>> list;
    bool flag = false;
};

template <class T>
CLI::Option* bind(CLI::App* sub, std::vector<std::unique_ptr<Override>>& store, const std::string& name,
                  const std::string& pointer, const std::string& help) {
    auto& o = store.emplace_back(std::make_unique<Override>());
    o->pointer = pointer;
    if constexpr (std::is_same_v<T, double>) {
        return sub->add_option(name, o->number, help);
    } else if constexpr (std::is_same_v<T, std::string>) {
        return sub->add_option(name, o->text, help);
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        return sub->add_option(name, o->list, help)->delimiter(',');
    } else {
        static_assert(std::is_same_v<T, bool>);
        return sub->add_flag(name, o->flag, help);
    }
}

void apply_override(Json& cfg, const Override& o) {
    const Json::json_pointer ptr(o.pointer);
    if (o.number) {
        const bool integral = cfg.contains(ptr) && cfg.at(ptr).is_number_integer();
        if (integral) {
            if (*o.number < 0 || std::floor(*o.number) != *o.number) throw ConfigError(o.pointer + " must be a non-negative integer");
            cfg[ptr] = static_cast<std::uint64_t>(*o.number);
        } else {
            cfg[ptr] = *o.number;
        }
    }
    if (o.text) cfg[ptr] = *o.text;
    if (o.list) cfg[ptr] = *o.list;
    if (o.flag) cfg[ptr] = true;
}

enum class Verbosity { quiet, normal, verbose };

int execute(const std::string& name, Json cfg, const fs::path& out_dir, unsigned threads, Verbosity verbosity) {
    Outputs out(out_dir);
    const Json summary = runners().at(name)(cfg, out, threads);
    out.json(name == "loss-budget" ? "loss_budget.json" : "summary.json", summary);

    Json manifest;
    manifest["tool"] = "twinbeam";
    manifest["version"] = TWINBEAM_VERSION;
    manifest["subcommand"] = name;
    manifest["seed"] = cfg.at("seed");
    manifest["config"] = cfg;
    manifest["outputs"] = out.names();
    std::ofstream(out.dir() / "manifest.json") << manifest.dump(2) << '\n';
    if (verbosity == Verbosity::verbose) {
        for (const auto& f : out.names()) std::cerr << "wrote " << (out.dir() / f).string() << '\n';
        std::cerr << "wrote " << (out.dir() / "manifest.json").string() << '\n';
    }
    if (verbosity != Verbosity::quiet) std::cout << summary.dump(2) << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"twinbeam: twin-beam generation in gas-filled kagome fibre"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", TWINBEAM_VERSION);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    unsigned threads = 1;
    app.add_option("--config", config_path, "JSON configuration file")->envname("TWINBEAM_CONFIG");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker threads (0: all cores)");
    bool gnuplot = false;
    app.add_flag("--gnuplot", gnuplot, "also write gnuplot scripts");
    bool quiet = false, verbose = false;
    app.add_flag("-q,--quiet", quiet, "do not print the summary");
    app.add_flag("-v,--verbose", verbose, "list written files on stderr");

    std::vector<std::unique_ptr<Override>> overrides;
    std::map<std::string, std::vector<Override*>> per_sub;
    auto add = [&](CLI::App* sub, auto tag, const std::string& name, const std::string& pointer, const std::string& help) {
        using T = typename decltype(tag)::type;
        bind<T>(sub, overrides, name, pointer, help);
        per_sub[sub->get_name()].push_back(overrides.back().get());
    };
    struct D { using type = double; };
    struct S { using type = std::string; };
    struct L { using type = std::vector<double>; };
    struct B { using type = bool; };

    auto* disp = app.add_subcommand("dispersion", "index, beta, beta2 and ZDW of the filled fibre");
    add(disp, D{}, "--pressure-bar", "/conditions/pressure_bar", "gas pressure");
    add(disp, D{}, "--temperature-k", "/conditions/temperature_K", "gas temperature");
    add(disp, L{}, "--zdw-pressures", "/dispersion/zdw_pressures_bar", "comma-separated pressures for zdw.csv");

    auto* pm = app.add_subcommand("phasematch", "phase-matched sidebands and MI gain");
    add(pm, D{}, "--pressure-bar", "/conditions/pressure_bar", "gas pressure");
    add(pm, D{}, "--energy-nj", "/pump/energy_nJ", "pump pulse energy");
    add(pm, S{}, "--sweep", "/phasematch/sweep", "none | pressure | power");
    add(pm, L{}, "--pressures", "/phasematch/pressures_bar", "comma-separated pressures (bar)");
    add(pm, L{}, "--energies-nj", "/phasematch/energies_nJ", "comma-separated pulse energies (nJ)");

    auto* mi = app.add_subcommand("mi-spectrum", "shot-averaged GNLSE output spectrum");
    add(mi, D{}, "--pressure-bar", "/conditions/pressure_bar", "gas pressure");
    add(mi, D{}, "--energy-nj", "/pump/energy_nJ", "pump pulse energy");
    add(mi, D{}, "--shots", "/propagation/shots", "noise realisations");
    add(mi, D{}, "--steps", "/propagation/steps", "split-step count");
    add(mi, D{}, "--samples", "/grid/samples", "grid size (power of two)");
    add(mi, D{}, "--window-ps", "/grid/window_ps", "time window");
    add(mi, D{}, "--snapshot-every", "/propagation/snapshot_every", "steps between z snapshots (0: none)");
    add(mi, B{}, "--self-steepening", "/propagation/self_steepening", "enable self-steepening");
    add(mi, B{}, "--loss", "/propagation/loss", "enable fibre loss");

    auto* jsa = app.add_subcommand("jsa", "joint spectral amplitude and Schmidt decomposition");
    add(jsa, D{}, "--pressure-bar", "/jsa/pressure_bar", "gas pressure");
    add(jsa, D{}, "--gain", "/jsa/gain", "parametric gain fixing the pump power");
    add(jsa, D{}, "--points", "/jsa/points", "points per axis");
    add(jsa, S{}, "--dump", "/jsa/dump", "csv | binary | none");

    auto* stats = app.add_subcommand("stats", "twin-beam photon statistics through loss and detection");
    auto* cal = app.add_subcommand("calibrate", "shot-noise calibration with coherent light");
    auto* sweep = app.add_subcommand("nrf-sweep", "NRF against attenuation or brightness");
    for (auto* sub : {stats, cal, sweep}) {
        add(sub, D{}, "--pulses", "/stats/pulses", "pulses per ensemble");
        add(sub, D{}, "--eta-s", "/stats/eta_s", "signal channel efficiency");
        add(sub, D{}, "--eta-i", "/stats/eta_i", "idler channel efficiency");
    }
    add(stats, D{}, "--K", "/stats/K", "Schmidt number of the mode mixture");
    add(stats, D{}, "--mean-photons", "/stats/mean_photons", "mean photons per pulse and beam");
    add(stats, B{}, "--raw-dump", "/stats/raw_dump", "write lossy counts as little-endian u32 pairs");
    add(sweep, S{}, "--kind", "/stats/sweep", "attenuation | brightness");
    add(sweep, D{}, "--K", "/stats/K", "Schmidt number of the mode mixture");

    auto* budget = app.add_subcommand("loss-budget", "channel efficiency and best NRF from an element list");
    std::string budget_file;
    budget->add_option("--file", budget_file, "element list (JSON)");

    auto* replay = app.add_subcommand("replay", "re-run a previous invocation from its manifest");
    std::string manifest_path;
    replay->add_option("manifest", manifest_path, "manifest.json of the run to repeat")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        auto* chosen = app.get_subcommands().front();
        std::string name = chosen->get_name();
        Json cfg;
        if (name == "replay") {
            const Json manifest = read_json_file(manifest_path);
            name = manifest.at("subcommand").get<std::string>();
            if (!runners().contains(name)) throw ConfigError("manifest names unknown subcommand '" + name + "'");
            cfg = manifest.at("config");
        } else {
            cfg = load_config(config_path);
            for (auto* o : per_sub[name]) apply_override(cfg, *o);
            if (name == "loss-budget" && !budget_file.empty()) cfg["loss_budget"] = read_json_file(budget_file);
            if (gnuplot) cfg["output"]["gnuplot"] = true;
        }
        if (seed) cfg["seed"] = *seed;
        const auto verbosity = quiet ? Verbosity::quiet : verbose ? Verbosity::verbose : Verbosity::normal;
        return execute(name, std::move(cfg), out_dir, threads, verbosity);
    } catch (const ConfigError& e) {
        std::cerr << "twinbeam: configuration error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Json::exception& e) {
        std::cerr << "twinbeam: configuration error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DomainError& e) {
        std::cerr << "twinbeam: " << e.what() << '\n';
        return kExitDomain;
    } catch (const std::exception& e) {
        std::cerr << "twinbeam: " << e.what() << '\n';
        return kExitDomain;
    }
}

#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinbeam/core.hpp"
#include "twinbeam/gas_dispersion.hpp"
#include "twinbeam/gnlse.hpp"
#include "twinbeam/phase_matching.hpp"
#include "twinbeam/photon_statistics.hpp"
#include "twinbeam/pump.hpp"

namespace twinbeam {

using Json = nlohmann::json;

/// Malformed or inconsistent configuration (as opposed to a physics domain error).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Built-in defaults; data/kagome_argon.json carries the same values.
inline Json default_config() {
    return Json::parse(R"({
  "seed": 1,
  "output": { "gnuplot": false },
  "gas": {
    "species": "argon",
    "sellmeier": [ {"B": 2.033229e-4, "C": 2.0612e-4},
                   {"B": 3.445831e-4, "C": 8.066e-3} ],
    "p_ref": 1.0,
    "T_ref": 273.0,
    "n2_ref": 9.8e-24,
    "window_nm": [400, 2100]
  },
  "fiber": {
    "flat_to_flat_m": 18.5e-6,
    "wall_m": 240e-9,
    "s": 0.03,
    "length_m": 0.30,
    "mode_area_factor": 0.48,
    "loss_table": [[400, 1.0], [2100, 1.0]]
  },
  "conditions": { "pressure_bar": 75.0, "temperature_K": 293.0 },
  "pump": { "wavelength_nm": 800.0, "energy_nJ": 250.0, "duration_fs": 300.0,
            "bandwidth_nm": 3.1, "rep_rate_Hz": 250000.0 },
  "grid": { "samples": 8192, "window_ps": 20.0 },
  "propagation": { "steps": 600, "shots": 20, "self_steepening": false, "loss": false,
                   "photons_per_bin": 1.0, "energy_tolerance": 1e-6, "snapshot_every": 0 },
  "dispersion": { "lambda_min_nm": 500.0, "lambda_max_nm": 1500.0, "points": 1001, "zdw_pressures_bar": [] },
  "spectrum": { "exclusion_THz": 20.0, "max_detuning_THz": 150.0, "smoothing_THz": 1.0 },
  "phasematch": { "guard_THz": 5.0, "scan_points": 2000, "max_detuning_THz": 0.0,
                  "sweep": "none", "pressures_bar": [], "energies_nJ": [] },
  "jsa": { "pressure_bar": 76.0, "gain": 4.2, "points": 256, "pump_points": 64, "dump": "csv" },
  "stats": {
    "K": 4.31,
    "mean_photons": 2000.0,
    "eta_s": 0.45,
    "eta_i": 0.45,
    "detector_s": { "qe": 0.95, "gain_pvs": 2.096, "sigma_photons": 600.0 },
    "detector_i": { "qe": 0.95, "gain_pvs": 2.178, "sigma_photons": 650.0 },
    "pulses": 1000000,
    "block": 1000,
    "resamples": 400,
    "subtract_noise": false,
    "raw_dump": false,
    "sweep": "attenuation",
    "calibration": { "ratios": [0.9, 1.0, 1.1],
                     "mean_totals": [200000, 400000, 800000, 1600000, 3200000] },
    "attenuation": { "base_eta": 0.45,
                     "extra_eta": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0] },
    "brightness": { "gains": [3.9, 4.1, 4.3, 4.6], "max_modes": 10, "mode_efficiency": [] }
  }
})");
}

/// Reads a JSON file; `//` and `/* */` comments are accepted.
inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return Json::parse(buf.str(), nullptr, true, true);
    } catch (const Json::parse_error& e) {
        throw ConfigError("'" + path + "': " + e.what());
    }
}

/// Defaults overlaid with the file's contents (RFC 7386 merge patch).
inline Json load_config(const std::string& path) {
    Json cfg = default_config();
    if (!path.empty()) cfg.merge_patch(read_json_file(path));
    return cfg;
}

namespace detail {

template <class T>
T get(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("missing config key '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

inline const Json& section(const Json& cfg, const char* key) {
    if (!cfg.contains(key) || !cfg.at(key).is_object()) throw ConfigError(std::string("missing config section '") + key + "'");
    return cfg.at(key);
}

}  // namespace detail

inline GasSpec gas_from_config(const Json& cfg) {
    const auto& j = detail::section(cfg, "gas");
    GasSpec gas;
    gas.species = detail::get<std::string>(j, "species");
    for (const auto& term : detail::get<Json>(j, "sellmeier")) {
        gas.sellmeier.push_back({detail::get<double>(term, "B"), detail::get<double>(term, "C")});
    }
    gas.p_ref_bar = detail::get<double>(j, "p_ref");
    gas.t_ref_k = detail::get<double>(j, "T_ref");
    gas.n2_ref = detail::get<double>(j, "n2_ref");
    if (j.contains("window_nm")) {
        const auto w = detail::get<std::vector<double>>(j, "window_nm");
        if (w.size() != 2) throw ConfigError("gas.window_nm must be [min, max]");
        gas.lambda_min_m = w[0] * 1e-9;
        gas.lambda_max_m = w[1] * 1e-9;
    }
    return gas;
}

inline FiberGeometry fiber_from_config(const Json& cfg) {
    const auto& j = detail::section(cfg, "fiber");
    FiberGeometry f;
    f.flat_to_flat_m = detail::get<double>(j, "flat_to_flat_m");
    f.wall_m = detail::get<double>(j, "wall_m");
    f.s_parameter = detail::get<double>(j, "s");
    f.length_m = detail::get<double>(j, "length_m");
    if (j.contains("mode_area_factor")) f.mode_area_factor = detail::get<double>(j, "mode_area_factor");
    if (j.contains("loss_table")) {
        std::vector<LossTable::Entry> entries;
        for (const auto& row : detail::get<std::vector<std::vector<double>>>(j, "loss_table")) {
            if (row.size() != 2) throw ConfigError("fiber.loss_table rows must be [wavelength_nm, dB_per_m]");
            entries.push_back({row[0] * 1e-9, row[1]});
        }
        f.loss = LossTable(std::move(entries));
    }
    return f;
}

inline double pressure_from_config(const Json& cfg) {
    return detail::get<double>(detail::section(cfg, "conditions"), "pressure_bar");
}

inline double temperature_from_config(const Json& cfg) {
    return detail::get<double>(detail::section(cfg, "conditions"), "temperature_K");
}

inline DispersionModel model_from_config(const Json& cfg) {
    return DispersionModel(gas_from_config(cfg), fiber_from_config(cfg), pressure_from_config(cfg),
                           temperature_from_config(cfg));
}

inline PumpSpec pump_from_config(const Json& cfg) {
    const auto& j = detail::section(cfg, "pump");
    PumpSpec p;
    p.wavelength_m = detail::get<double>(j, "wavelength_nm") * 1e-9;
    p.energy_j = detail::get<double>(j, "energy_nJ") * 1e-9;
    p.duration_fwhm_s = detail::get<double>(j, "duration_fs") * 1e-15;
    p.bandwidth_fwhm_m = detail::get<double>(j, "bandwidth_nm") * 1e-9;
    p.rep_rate_hz = detail::get<double>(j, "rep_rate_Hz");
    return p;
}

inline SimulationGrid grid_from_config(const Json& cfg) {
    const auto& j = detail::section(cfg, "grid");
    return SimulationGrid(detail::get<std::size_t>(j, "samples"), detail::get<double>(j, "window_ps") * 1e-12,
                          pump_from_config(cfg).omega());
}

inline PropagationConfig propagation_from_config(const Json& cfg) {
    const auto& j = detail::section(cfg, "propagation");
    PropagationConfig p;
    p.steps = detail::get<int>(j, "steps");
    p.shots = detail::get<int>(j, "shots");
    p.self_steepening = detail::get<bool>(j, "self_steepening");
    p.loss = detail::get<bool>(j, "loss");
    p.photons_per_bin = detail::get<double>(j, "photons_per_bin");
    p.energy_tolerance = detail::get<double>(j, "energy_tolerance");
    p.snapshot_every = detail::get<int>(j, "snapshot_every");
    p.seed = detail::get<std::uint64_t>(cfg, "seed");
    return p;
}

inline SidebandSearch search_from_config(const Json& cfg) {
    const auto& j = detail::section(cfg, "phasematch");
    SidebandSearch s;
    s.guard = thz_to_omega(detail::get<double>(j, "guard_THz"));
    s.max_detuning = thz_to_omega(detail::get<double>(j, "max_detuning_THz"));
    s.scan_points = detail::get<int>(j, "scan_points");
    if (s.scan_points < 2) throw ConfigError("phasematch.scan_points must be >= 2");
    return s;
}

inline DetectorSpec detector_from_json(const Json& j) {
    DetectorSpec d;
    d.qe = detail::get<double>(j, "qe");
    d.gain_pvs = detail::get<double>(j, "gain_pvs");
    d.sigma_photons = detail::get<double>(j, "sigma_photons");
    return d;
}

/// Schmidt weights for the stats section: explicit `lambdas`, or geometric
/// weights reproducing `K`.
inline std::vector<double> weights_from_config(const Json& stats) {
    if (stats.contains("lambdas") && !stats.at("lambdas").is_null()) return detail::get<std::vector<double>>(stats, "lambdas");
    if (stats.contains("K") && !stats.at("K").is_null()) return weights_for_schmidt_number(detail::get<double>(stats, "K"));
    throw ConfigError("stats needs one of 'modes', 'lambdas' or 'K'");
}

/// Mode occupations: explicit `modes` (mean photons per mode) take precedence,
/// otherwise `mean_photons` is distributed over the Schmidt weights.
inline ModeSet modes_from_config(const Json& cfg) {
    const auto& j = detail::section(cfg, "stats");
    if (j.contains("modes") && !j.at("modes").is_null()) {
        ModeSet m;
        m.mean_photons = detail::get<std::vector<double>>(j, "modes");
        m.validate();
        return m;
    }
    const auto w = weights_from_config(j);
    return modes_from_weights(w, detail::get<double>(j, "mean_photons"));
}

inline NrfOptions nrf_options_from_config(const Json& cfg) {
    const auto& j = detail::section(cfg, "stats");
    NrfOptions o;
    o.bootstrap.block = detail::get<std::size_t>(j, "block");
    o.bootstrap.resamples = detail::get<std::size_t>(j, "resamples");
    o.bootstrap.seed = detail::get<std::uint64_t>(cfg, "seed") ^ 0x626f6f74u;
    o.subtract_noise = detail::get<bool>(j, "subtract_noise");
    return o;
}

inline BudgetChannel budget_channel(const std::string& s) {
    if (s == "both") return BudgetChannel::both;
    if (s == "signal") return BudgetChannel::signal;
    if (s == "idler") return BudgetChannel::idler;
    throw ConfigError("loss budget channel must be both, signal or idler, got '" + s + "'");
}

/// {"elements": [{"name", "transmission", "count", "channel"?}, ...]}
inline LossBudget loss_budget_from_json(const Json& j) {
    LossBudget b;
    for (const auto& e : detail::get<Json>(j, "elements")) {
        LossElement el;
        el.name = detail::get<std::string>(e, "name");
        el.transmission = detail::get<double>(e, "transmission");
        el.count = e.contains("count") ? detail::get<int>(e, "count") : 1;
        el.channel = e.contains("channel") ? budget_channel(detail::get<std::string>(e, "channel")) : BudgetChannel::both;
        b.elements.push_back(std::move(el));
    }
    return b;
}

}  // namespace twinbeam

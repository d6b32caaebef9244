#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "twinbeam/config.hpp"

using namespace twinbeam;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
    const auto path = fs::temp_directory_path() / ("twinbeam_cfg_" + name);
    std::ofstream(path) << content;
    return path;
}

}  // namespace

TEST(Config, ShippedFileMatchesDefaults) {
    const auto file = read_json_file(std::string(TWINBEAM_DATA_DIR) + "/kagome_argon.json");
    EXPECT_EQ(file, default_config());
}

TEST(Config, MergePatchOverridesLeaves) {
    const auto path = temp_file("patch.json", R"(// comment
{ "conditions": { "pressure_bar": 60 }, "seed": 9 })");
    const auto cfg = load_config(path.string());
    EXPECT_EQ(cfg["conditions"]["pressure_bar"], 60);
    EXPECT_EQ(cfg["conditions"]["temperature_K"], 293.0);
    EXPECT_EQ(propagation_from_config(cfg).seed, 9u);
    fs::remove(path);
}

TEST(Config, BuildsModels) {
    const auto cfg = default_config();
    const auto gas = gas_from_config(cfg);
    EXPECT_EQ(gas.sellmeier.size(), 2u);
    EXPECT_DOUBLE_EQ(gas.lambda_max_m, 2100e-9);
    const auto model = model_from_config(cfg);
    EXPECT_EQ(model.pressure(), 75.0);
    const auto pump = pump_from_config(cfg);
    EXPECT_DOUBLE_EQ(pump.energy_j, 250e-9);
    EXPECT_DOUBLE_EQ(pump.duration_fwhm_s, 300e-15);
    const auto grid = grid_from_config(cfg);
    EXPECT_EQ(grid.size(), 8192u);
    const auto search = search_from_config(cfg);
    EXPECT_NEAR(omega_to_thz(search.guard), 5.0, 1e-12);
    EXPECT_NEAR(model.fiber().loss.db_per_m(800e-9), 1.0, 1e-15);
}

TEST(Config, StatsModes) {
    auto cfg = default_config();
    const auto modes = modes_from_config(cfg);
    EXPECT_NEAR(modes.total(), 2000.0, 1e-9);
    double s2 = 0.0;
    for (double m : modes.mean_photons) s2 += (m / 2000.0) * (m / 2000.0);
    EXPECT_NEAR(1.0 / s2, 4.31, 1e-8);

    cfg["stats"]["lambdas"] = {0.5, 0.5};
    EXPECT_EQ(modes_from_config(cfg).mean_photons, (std::vector<double>{1000.0, 1000.0}));
    cfg["stats"]["modes"] = {3.0, 4.0, 5.0};
    EXPECT_EQ(modes_from_config(cfg).size(), 3u);
    cfg["stats"].erase("modes");
    cfg["stats"].erase("lambdas");
    cfg["stats"].erase("K");
    EXPECT_THROW(modes_from_config(cfg), ConfigError);
}

TEST(Config, NrfOptionsAndDetectors) {
    const auto cfg = default_config();
    const auto opt = nrf_options_from_config(cfg);
    EXPECT_EQ(opt.bootstrap.block, 1000u);
    EXPECT_EQ(opt.bootstrap.resamples, 400u);
    EXPECT_FALSE(opt.subtract_noise);
    const auto d = detector_from_json(cfg["stats"]["detector_i"]);
    EXPECT_DOUBLE_EQ(d.gain_pvs, 2.178);
    EXPECT_DOUBLE_EQ(d.sigma_photons, 650.0);
}

TEST(Config, LossBudgetFile) {
    const auto j = read_json_file(std::string(TWINBEAM_DATA_DIR) + "/detection_path_budget.json");
    const auto r = loss_budget(loss_budget_from_json(j));
    EXPECT_NEAR(r.eta_total, 0.4488, 5e-5);
    EXPECT_NEAR(r.nrf_best, 0.55, 0.005);
    const auto best = loss_budget(loss_budget_from_json(read_json_file(std::string(TWINBEAM_DATA_DIR) + "/optimal_source.json")));
    EXPECT_NEAR(best.nrf_best_db, -18.24, 0.01);
    EXPECT_THROW(budget_channel("left"), ConfigError);
    EXPECT_THROW(loss_budget_from_json(Json::parse(R"({"elements": [{"transmission": 0.5}]})")), ConfigError);
}

TEST(Config, ErrorsAreConfigErrors) {
    EXPECT_THROW(read_json_file("/nonexistent/twinbeam.json"), ConfigError);
    const auto bad = temp_file("bad.json", "{ not json");
    EXPECT_THROW(load_config(bad.string()), ConfigError);
    fs::remove(bad);

    auto cfg = default_config();
    cfg["pump"]["energy_nJ"] = "lots";
    EXPECT_THROW(pump_from_config(cfg), ConfigError);
    cfg = default_config();
    cfg.erase("gas");
    EXPECT_THROW(gas_from_config(cfg), ConfigError);
    cfg = default_config();
    cfg["gas"]["window_nm"] = {400};
    EXPECT_THROW(gas_from_config(cfg), ConfigError);
    cfg = default_config();
    cfg["fiber"]["loss_table"] = {{400, 1, 2}};
    EXPECT_THROW(fiber_from_config(cfg), ConfigError);
    cfg = default_config();
    cfg["phasematch"]["scan_points"] = 1;
    EXPECT_THROW(search_from_config(cfg), ConfigError);
}

TEST(Config, PhysicsErrorsStayDomainErrors) {
    auto cfg = default_config();
    cfg["conditions"]["pressure_bar"] = -5;
    EXPECT_THROW(model_from_config(cfg), DomainError);
    cfg = default_config();
    cfg["grid"]["samples"] = 1000;
    EXPECT_THROW(grid_from_config(cfg), DomainError);
}

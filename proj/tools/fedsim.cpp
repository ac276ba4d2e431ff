// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end for the federated-learning simulator.
//
//   fedsim preset --name exp2 --variant bad_clients --privacy dp \
//          --strategies afa,comed --seed 7 --out results/
//   fedsim run --config my_run.cfg --out results/

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedsim/config.hpp"
#include "fedsim/simulator.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

std::string default_data_dir() {
    if (const char* env = std::getenv("FEDSIM_DATA_DIR")) return env;
    return "data";
}

fedsim::TabularDataset load_dataset(const std::string& name, const std::string& data_dir) {
    const fs::path path = fs::path(data_dir) / (name + ".csv");
    if (!fs::exists(path)) {
        throw fedsim::IngestionError(
            "dataset file not found: " + path.string() +
            "\nPlace pima.csv / heart.csv under the data directory (--data-dir or "
            "FEDSIM_DATA_DIR).\nSee data/README.md for download instructions; synthetic "
            "fixtures with the same schema ship with the repository.");
    }
    if (name == "pima") return fedsim::load_pima(path.string());
    if (name == "heart") return fedsim::load_heart(path.string());
    throw fedsim::ConfigError("unknown dataset '" + name + "' (expected pima or heart)");
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

int run_strategies(fedsim::SimulationConfig cfg, const std::vector<fedsim::Strategy>& strategies,
                   const std::string& data_dir, const std::string& out_dir,
                   const std::string& run_name) {
    fedsim::TabularDataset full;
    try {
        full = load_dataset(cfg.dataset, data_dir);
    } catch (const fedsim::IngestionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }

    fs::create_directories(out_dir);
    nlohmann::json manifest;
    manifest["run"] = run_name;
    manifest["strategies"] = nlohmann::json::array();

    for (auto strategy : strategies) {
        cfg.strategy = strategy;
        auto result = fedsim::run_simulation(cfg, full);
        const std::string csv_name = run_name + "_" + fedsim::to_string(strategy) + ".csv";
        write_file(fs::path(out_dir) / csv_name, fedsim::metrics_to_csv(result, strategy));

        nlohmann::json entry;
        entry["strategy"] = fedsim::to_string(strategy);
        entry["csv"] = csv_name;
        entry["config"] = fedsim::config_to_json(cfg);
        entry["metadata"] = result.metadata;
        entry["terminated_all_blocked"] = result.terminated_all_blocked;
        nlohmann::json blocks = nlohmann::json::array();
        for (const auto& [round, id] : result.block_events) blocks.push_back({round, id});
        entry["block_events"] = blocks;
        if (!result.rounds.empty()) entry["final_test_error"] = result.rounds.back().test_error;
        manifest["strategies"].push_back(entry);
        std::cout << run_name << " " << fedsim::to_string(strategy) << ": " << result.rounds.size()
                  << " rounds, final error "
                  << (result.rounds.empty() ? -1.0 : result.rounds.back().test_error) << "\n";
    }
    write_file(fs::path(out_dir) / (run_name + "_manifest.json"), manifest.dump(2) + "\n");
    return kExitOk;
}

std::vector<fedsim::Strategy> parse_strategies(const std::string& arg) {
    std::vector<fedsim::Strategy> out;
    if (arg == "all") {
        return {fedsim::Strategy::fedavg, fedsim::Strategy::comed, fedsim::Strategy::mkrum,
                fedsim::Strategy::afa};
    }
    std::stringstream ss(arg);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(fedsim::parse_strategy(item));
    if (out.empty()) throw fedsim::ConfigError("no strategies given");
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated-learning simulator: robust aggregation with privacy mechanisms"};
    app.require_subcommand(1);

    std::string name = "exp1", variant = "clean", privacy = "none", strategies_arg = "all";
    std::string out_dir = "results", data_dir = default_data_dir(), config_path;
    std::uint64_t seed = 1;

    auto* preset = app.add_subcommand("preset", "Run a built-in experiment preset");
    preset->add_option("--name", name, "exp1 (diabetes) or exp2 (heart)");
    preset->add_option("--variant", variant, "clean or bad_clients");
    preset->add_option("--privacy", privacy, "none, dp or kanon");
    preset->add_option("--strategies", strategies_arg, "comma list of fedavg,comed,mkrum,afa or 'all'");
    preset->add_option("--seed", seed, "master seed");
    preset->add_option("--out", out_dir, "output directory");
    preset->add_option("--data-dir", data_dir, "directory holding pima.csv / heart.csv");

    auto* run = app.add_subcommand("run", "Run from a config file");
    run->add_option("--config", config_path, "config file path")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--data-dir", data_dir, "directory holding pima.csv / heart.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (preset->parsed()) {
            auto cfg = fedsim::make_preset(name, variant, privacy);
            cfg.master_seed = seed;
            const std::string run_name = name + "_" + variant + "_" + privacy;
            return run_strategies(cfg, parse_strategies(strategies_arg), data_dir, out_dir, run_name);
        }
        auto cfg = fedsim::load_config(config_path);
        return run_strategies(cfg, {cfg.strategy}, data_dir, out_dir,
                              fs::path(config_path).stem().string());
    } catch (const fedsim::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const fedsim::IngestionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

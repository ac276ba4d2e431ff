// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsim/simulator.hpp"

namespace fedsim {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Built-in experiment presets.
//   exp1: Pima diabetes, 10 clients, [200, 200, 2], 50 rounds
//   exp2: Cleveland heart, 5 clients, [32, 16, 2], 100 rounds
// variant bad_clients marks client 1 faulty and clients 2 (+4 for exp1)
// malicious.
inline SimulationConfig make_preset(const std::string& name, const std::string& variant,
                                    const std::string& privacy) {
    SimulationConfig cfg;
    if (name == "exp1") {
        cfg.dataset = "pima";
        cfg.rounds = 50;
        cfg.local_epochs = 5;
        cfg.batch_size = 10;
        cfg.learning_rate = 1e-5;
        cfg.model_widths = {200, 200, 2};
        cfg.train_count = 614;
        cfg.test_count = 154;
        cfg.partition_plan.client_sizes = {39, 39, 39, 59, 59, 59, 80, 80, 80, 80};
        cfg.assumed_bad = 3;
        cfg.mkrum_cfg.m = 5; // n - f - 2, the Krum neighbor count
        cfg.kanon_cfg = {4, {"Age", "Pregnancies"}};
        if (variant == "bad_clients") {
            // noise_std 5: clearly disruptive next to weight scales ~1e-1
            cfg.behaviors[1] = {BehaviorKind::faulty_noise, 5.0, 1.0};
            cfg.behaviors[2] = {BehaviorKind::malicious_label_flip, 1.0, 1.0};
            cfg.behaviors[4] = {BehaviorKind::malicious_label_flip, 1.0, 1.0};
        }
    } else if (name == "exp2") {
        cfg.dataset = "heart";
        cfg.rounds = 100;
        cfg.local_epochs = 10;
        cfg.batch_size = 5;
        cfg.learning_rate = 1e-4;
        cfg.model_widths = {32, 16, 2};
        cfg.train_count = 207;
        cfg.test_count = 46; // 44 of the 297 usable rows stay unused
        cfg.partition_plan.client_sizes = {41, 41, 41, 42, 42};
        cfg.assumed_bad = 2;
        cfg.mkrum_cfg.m = 1; // n - f - 2 degenerates to plain Krum
        // five clients: a single outlier can deviate at most 2 sigma
        // (Samuelson bound), so the cut must sit below that
        cfg.afa_cfg.xi = 1.5;
        cfg.kanon_cfg = {4, {"age", "sex"}};
        if (variant == "bad_clients") {
            cfg.behaviors[1] = {BehaviorKind::faulty_noise, 5.0, 1.0};
            cfg.behaviors[2] = {BehaviorKind::malicious_label_flip, 1.0, 1.0};
        }
    } else {
        throw ConfigError("unknown preset '" + name + "' (expected exp1 or exp2)");
    }
    if (variant != "clean" && variant != "bad_clients") {
        throw ConfigError("unknown variant '" + variant + "' (expected clean or bad_clients)");
    }

    if (privacy == "none") {
        cfg.privacy = PrivacyMode::none;
    } else if (privacy == "dp") {
        cfg.privacy = PrivacyMode::dp;
        cfg.dp_cfg.release_fraction = 0.1;
        cfg.dp_cfg.epsilon1 = 1e-4;
        cfg.dp_cfg.epsilon2 = 1e-4;
        cfg.dp_cfg.epsilon3 = 1e-4;
        cfg.dp_cfg.gamma = 10.0;
        cfg.dp_cfg.sensitivity = 20.0;
        cfg.dp_cfg.noise_model = DpNoiseModel::direct_scale;
    } else if (privacy == "kanon") {
        cfg.privacy = PrivacyMode::kanon;
    } else {
        throw ConfigError("unknown privacy mode '" + privacy + "' (expected none, dp or kanon)");
    }
    return cfg;
}

inline Strategy parse_strategy(const std::string& s) {
    if (s == "fedavg") return Strategy::fedavg;
    if (s == "comed") return Strategy::comed;
    if (s == "mkrum") return Strategy::mkrum;
    if (s == "afa") return Strategy::afa;
    throw ConfigError("unknown strategy '" + s + "'");
}

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

inline double parse_real(const std::string& v, const std::string& key, int line) {
    if (v == "inf" || v == "infinite") return kInfiniteEpsilon;
    try {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": bad numeric value for '" + key + "'");
    }
}

inline std::size_t parse_uint(const std::string& v, const std::string& key, int line) {
    try {
        std::size_t pos = 0;
        long long x = std::stoll(v, &pos);
        if (pos != v.size() || x < 0) throw std::invalid_argument(v);
        return static_cast<std::size_t>(x);
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": bad integer value for '" + key + "'");
    }
}

} // namespace detail

// Flat key-value config with [section] headers per module. A `preset` key
// selects the base; every other key overrides one field. Unknown keys are
// rejected with the line number.
//
//   preset = exp2
//   variant = bad_clients
//   privacy = dp
//   rounds = 20
//   [dp]
//   gamma = 5
//   [behaviors]
//   3 = malicious
inline SimulationConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);

    // first pass: preset selection so overrides land on the right base
    std::string preset = "exp1", variant = "clean", privacy = "none";
    {
        std::string line;
        int lineno = 0;
        std::string section;
        while (std::getline(in, line)) {
            ++lineno;
            std::string t = detail::trim(line);
            if (t.empty() || t[0] == '#') continue;
            if (t.front() == '[') continue;
            auto eq = t.find('=');
            if (eq == std::string::npos) continue;
            std::string key = detail::trim(t.substr(0, eq));
            std::string val = detail::trim(t.substr(eq + 1));
            if (key == "preset") preset = val;
            else if (key == "variant") variant = val;
            else if (key == "privacy") privacy = val;
        }
    }
    SimulationConfig cfg = make_preset(preset, variant, privacy);

    in.clear();
    in.seekg(0);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": bad section header");
            section = t.substr(1, t.size() - 2);
            if (section != "dp" && section != "kanon" && section != "mkrum" && section != "afa" &&
                section != "behaviors") {
                throw ConfigError("line " + std::to_string(lineno) + ": unknown section '" + section + "'");
            }
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        std::string key = detail::trim(t.substr(0, eq));
        std::string val = detail::trim(t.substr(eq + 1));

        if (section.empty()) {
            if (key == "preset" || key == "variant" || key == "privacy") continue; // handled above
            if (key == "dataset") cfg.dataset = val;
            else if (key == "rounds") cfg.rounds = detail::parse_uint(val, key, lineno);
            else if (key == "local_epochs") cfg.local_epochs = detail::parse_uint(val, key, lineno);
            else if (key == "batch_size") cfg.batch_size = detail::parse_uint(val, key, lineno);
            else if (key == "learning_rate") cfg.learning_rate = detail::parse_real(val, key, lineno);
            else if (key == "train_count") cfg.train_count = detail::parse_uint(val, key, lineno);
            else if (key == "test_count") cfg.test_count = detail::parse_uint(val, key, lineno);
            else if (key == "master_seed") cfg.master_seed = detail::parse_uint(val, key, lineno);
            else if (key == "strategy") cfg.strategy = parse_strategy(val);
            else if (key == "assumed_bad") cfg.assumed_bad = detail::parse_uint(val, key, lineno);
            else if (key == "normalize") cfg.normalize_features = val == "true" || val == "1";
            else if (key == "model_widths") {
                cfg.model_widths.clear();
                for (const auto& w : detail::split_list(val)) {
                    cfg.model_widths.push_back(detail::parse_uint(w, key, lineno));
                }
            } else if (key == "partition") {
                cfg.partition_plan.client_sizes.clear();
                for (const auto& w : detail::split_list(val)) {
                    cfg.partition_plan.client_sizes.push_back(detail::parse_uint(w, key, lineno));
                }
            } else {
                throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
            }
        } else if (section == "dp") {
            if (key == "gamma") cfg.dp_cfg.gamma = detail::parse_real(val, key, lineno);
            else if (key == "sensitivity") cfg.dp_cfg.sensitivity = detail::parse_real(val, key, lineno);
            else if (key == "release_fraction") cfg.dp_cfg.release_fraction = detail::parse_real(val, key, lineno);
            else if (key == "epsilon1") cfg.dp_cfg.epsilon1 = detail::parse_real(val, key, lineno);
            else if (key == "epsilon2") cfg.dp_cfg.epsilon2 = detail::parse_real(val, key, lineno);
            else if (key == "epsilon3") cfg.dp_cfg.epsilon3 = detail::parse_real(val, key, lineno);
            else if (key == "noise_model") {
                if (val == "svt") cfg.dp_cfg.noise_model = DpNoiseModel::svt_scaled;
                else if (val == "direct") cfg.dp_cfg.noise_model = DpNoiseModel::direct_scale;
                else throw ConfigError("line " + std::to_string(lineno) + ": noise_model must be svt or direct");
            } else {
                throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "' in [dp]");
            }
        } else if (section == "kanon") {
            if (key == "k") cfg.kanon_cfg.k = detail::parse_uint(val, key, lineno);
            else if (key == "quasi_identifiers") cfg.kanon_cfg.quasi_identifiers = detail::split_list(val);
            else throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "' in [kanon]");
        } else if (section == "mkrum") {
            if (key == "m") cfg.mkrum_cfg.m = detail::parse_uint(val, key, lineno);
            else if (key == "neighbor_mode") {
                if (val == "all_pairs") cfg.mkrum_cfg.neighbor_mode = KrumNeighborMode::all_pairs;
                else if (val == "truncated") cfg.mkrum_cfg.neighbor_mode = KrumNeighborMode::truncated;
                else throw ConfigError("line " + std::to_string(lineno) + ": neighbor_mode must be all_pairs or truncated");
            } else {
                throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "' in [mkrum]");
            }
        } else if (section == "afa") {
            if (key == "xi") cfg.afa_cfg.xi = detail::parse_real(val, key, lineno);
            else if (key == "delta_xi") cfg.afa_cfg.delta_xi = detail::parse_real(val, key, lineno);
            else if (key == "block_threshold") cfg.afa_cfg.block_threshold = detail::parse_real(val, key, lineno);
            else if (key == "alpha0") cfg.afa_cfg.alpha0 = detail::parse_real(val, key, lineno);
            else if (key == "beta0") cfg.afa_cfg.beta0 = detail::parse_real(val, key, lineno);
            else throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "' in [afa]");
        } else if (section == "behaviors") {
            const int id = static_cast<int>(detail::parse_uint(key, key, lineno));
            ClientBehavior b;
            auto parts = detail::split_list(val);
            if (parts.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty behavior");
            if (parts[0] == "honest") b.kind = BehaviorKind::honest;
            else if (parts[0] == "malicious") {
                b.kind = BehaviorKind::malicious_label_flip;
                if (parts.size() > 1) b.flip_fraction = detail::parse_real(parts[1], key, lineno);
            } else if (parts[0] == "faulty") {
                b.kind = BehaviorKind::faulty_noise;
                if (parts.size() > 1) b.noise_std = detail::parse_real(parts[1], key, lineno);
            } else {
                throw ConfigError("line " + std::to_string(lineno) + ": unknown behavior '" + parts[0] + "'");
            }
            cfg.behaviors[id] = b;
        }
    }
    return cfg;
}

// Resolved config as JSON, embedded in run manifests; loading it back
// reproduces the identical run.
inline nlohmann::json config_to_json(const SimulationConfig& cfg) {
    nlohmann::json j;
    j["dataset"] = cfg.dataset;
    j["rounds"] = cfg.rounds;
    j["local_epochs"] = cfg.local_epochs;
    j["batch_size"] = cfg.batch_size;
    j["learning_rate"] = cfg.learning_rate;
    j["model_widths"] = cfg.model_widths;
    j["train_count"] = cfg.train_count;
    j["test_count"] = cfg.test_count;
    j["partition"] = cfg.partition_plan.client_sizes;
    j["strategy"] = to_string(cfg.strategy);
    j["assumed_bad"] = cfg.assumed_bad;
    j["normalize"] = cfg.normalize_features;
    j["master_seed"] = cfg.master_seed;
    j["privacy"] = to_string(cfg.privacy);
    j["mkrum"] = {{"m", cfg.mkrum_cfg.m},
                  {"neighbor_mode",
                   cfg.mkrum_cfg.neighbor_mode == KrumNeighborMode::all_pairs ? "all_pairs" : "truncated"}};
    j["afa"] = {{"xi", cfg.afa_cfg.xi},
                {"delta_xi", cfg.afa_cfg.delta_xi},
                {"block_threshold", cfg.afa_cfg.block_threshold},
                {"alpha0", cfg.afa_cfg.alpha0},
                {"beta0", cfg.afa_cfg.beta0}};
    if (cfg.privacy == PrivacyMode::dp) {
        j["dp"] = {{"gamma", cfg.dp_cfg.gamma},
                   {"sensitivity", cfg.dp_cfg.sensitivity},
                   {"release_fraction", cfg.dp_cfg.release_fraction},
                   {"epsilon1", std::isinf(cfg.dp_cfg.epsilon1) ? -1.0 : cfg.dp_cfg.epsilon1},
                   {"epsilon2", std::isinf(cfg.dp_cfg.epsilon2) ? -1.0 : cfg.dp_cfg.epsilon2},
                   {"epsilon3", std::isinf(cfg.dp_cfg.epsilon3) ? -1.0 : cfg.dp_cfg.epsilon3},
                   {"noise_model",
                    cfg.dp_cfg.noise_model == DpNoiseModel::svt_scaled ? "svt" : "direct"}};
        // epsilon2 has no reported experimental value; the symmetric default
        // is flagged so downstream analysis can see it
        j["open_flags"] = {"epsilon2_default_by_symmetry"};
    }
    if (cfg.privacy == PrivacyMode::kanon) {
        j["kanon"] = {{"k", cfg.kanon_cfg.k}, {"quasi_identifiers", cfg.kanon_cfg.quasi_identifiers}};
    }
    nlohmann::json b = nlohmann::json::object();
    for (const auto& [id, beh] : cfg.behaviors) {
        std::string kind = beh.kind == BehaviorKind::honest ? "honest"
                           : beh.kind == BehaviorKind::malicious_label_flip ? "malicious" : "faulty";
        b[std::to_string(id)] = {{"kind", kind},
                                 {"noise_std", beh.noise_std},
                                 {"flip_fraction", beh.flip_fraction}};
    }
    j["behaviors"] = b;
    return j;
}

} // namespace fedsim

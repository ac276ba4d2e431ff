// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fedsim/adversary.hpp"
#include "fedsim/aggregation.hpp"
#include "fedsim/data.hpp"
#include "fedsim/kanon.hpp"
#include "fedsim/nn.hpp"
#include "fedsim/privacy.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

enum class Strategy { fedavg, comed, mkrum, afa };
enum class PrivacyMode { none, dp, kanon };

inline std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::fedavg: return "fedavg";
        case Strategy::comed: return "comed";
        case Strategy::mkrum: return "mkrum";
        case Strategy::afa: return "afa";
    }
    return "?";
}

inline std::string to_string(PrivacyMode p) {
    switch (p) {
        case PrivacyMode::none: return "none";
        case PrivacyMode::dp: return "dp";
        case PrivacyMode::kanon: return "kanon";
    }
    return "?";
}

struct SimulationConfig {
    std::string dataset = "pima"; // pima | heart
    std::size_t rounds = 50;
    std::size_t local_epochs = 5;
    std::size_t batch_size = 10;
    double learning_rate = 1e-5;
    std::vector<std::size_t> model_widths = {200, 200, 2};
    std::size_t train_count = 614;
    std::size_t test_count = 0; // 0 = everything after the training split
    PartitionPlan partition_plan;
    Strategy strategy = Strategy::fedavg;
    MkrumConfig mkrum_cfg;
    std::size_t assumed_bad = 0; // f for Krum
    AfaConfig afa_cfg;
    std::map<int, ClientBehavior> behaviors; // 1-based client ids
    PrivacyMode privacy = PrivacyMode::none;
    DpConfig dp_cfg;
    KAnonConfig kanon_cfg;
    bool normalize_features = true;
    std::uint64_t master_seed = 1;
};

enum class ClientStatus { accepted, rejected, blocked, not_contacted };

inline std::string to_string(ClientStatus s) {
    switch (s) {
        case ClientStatus::accepted: return "accepted";
        case ClientStatus::rejected: return "rejected";
        case ClientStatus::blocked: return "blocked";
        case ClientStatus::not_contacted: return "not_contacted";
    }
    return "?";
}

struct RoundMetrics {
    std::size_t round = 0;
    double test_error = 0.0;
    double test_loss = 0.0;
    std::map<int, ClientStatus> client_status;
    std::vector<std::pair<std::size_t, int>> block_events; // (round, client_id), this round
};

struct RunResult {
    std::vector<RoundMetrics> rounds;
    std::vector<std::pair<std::size_t, int>> block_events; // cumulative
    bool terminated_all_blocked = false;
    nlohmann::json metadata; // resolved notes: unused rows, merged mapping, flags
};

namespace detail {

inline void validate_config(const SimulationConfig& cfg) {
    if (cfg.rounds == 0) throw std::invalid_argument("rounds must be >= 1");
    if (cfg.local_epochs == 0) throw std::invalid_argument("local_epochs must be >= 1");
    if (cfg.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (cfg.partition_plan.client_sizes.empty()) throw std::invalid_argument("empty partition plan");
    const int n = static_cast<int>(cfg.partition_plan.client_sizes.size());
    for (const auto& [id, b] : cfg.behaviors) {
        if (id < 1 || id > n) throw std::invalid_argument("behavior for unknown client " + std::to_string(id));
    }
}

} // namespace detail

// Full federated run over an already-loaded dataset. Deterministic: equal
// configs and data give bit-identical metrics.
inline RunResult run_simulation(const SimulationConfig& cfg, const TabularDataset& full) {
    detail::validate_config(cfg);
    const std::size_t n_clients = cfg.partition_plan.client_sizes.size();

    RunResult result;
    result.metadata["dataset_rows"] = full.rows();

    auto [train, test] = split(full, cfg.train_count, derive_seed(cfg.master_seed, 0, 0, "split"),
                               cfg.test_count);
    PartitionPlan plan = cfg.partition_plan;
    plan.seed = derive_seed(cfg.master_seed, 0, 0, "partition");
    auto client_data = partition(train, plan);
    result.metadata["unused_rows"] = full.rows() - cfg.train_count - test.rows();

    // label flipping happens once, before round 1
    for (const auto& [id, b] : cfg.behaviors) {
        if (b.kind == BehaviorKind::malicious_label_flip) {
            Rng rng(derive_seed(cfg.master_seed, static_cast<std::uint64_t>(id), 0, "flip"));
            client_data[id - 1] = flip_labels(client_data[id - 1], b.flip_fraction, rng);
        }
    }

    // k-anonymity: each client fits a mapping on local data; the aggregator
    // applies the merged mapping to its test set
    if (cfg.privacy == PrivacyMode::kanon) {
        std::vector<GeneralizationMapping> mappings;
        for (std::size_t i = 0; i < n_clients; ++i) {
            KAnonConfig kc = cfg.kanon_cfg;
            kc.k = std::min(kc.k, client_data[i].rows());
            mappings.push_back(fit_k_anonymity(client_data[i], kc));
            client_data[i] = apply_mapping(client_data[i], mappings.back());
        }
        auto merged = merge_mappings(mappings, test, cfg.kanon_cfg);
        test = apply_mapping(test, merged);
        result.metadata["kanon_merged_mapping"] = merged.to_json();
    }

    if (cfg.normalize_features) {
        TabularDataset all_train;
        all_train.n_cols = train.n_cols;
        all_train.schema = train.schema;
        for (const auto& cd : client_data) {
            all_train.features.insert(all_train.features.end(), cd.features.begin(),
                                      cd.features.end());
            all_train.labels.insert(all_train.labels.end(), cd.labels.begin(), cd.labels.end());
        }
        auto stats = fit_normalization(all_train);
        for (auto& cd : client_data) apply_normalization(cd, stats);
        apply_normalization(test, stats);
    }

    const std::size_t input_width = full.n_cols;
    MlpModel model(input_width, cfg.model_widths);
    {
        Rng rng(derive_seed(cfg.master_seed, 0, 0, "init"));
        model.init(rng);
    }
    ParameterVector global = model.flatten();

    std::unordered_map<int, ClientProfile> profiles;
    for (std::size_t i = 0; i < n_clients; ++i) {
        const int id = static_cast<int>(i) + 1;
        profiles[id] = ClientProfile{id, cfg.afa_cfg.alpha0, cfg.afa_cfg.beta0, false};
    }

    MlpModel eval_model(input_width, cfg.model_widths);

    for (std::size_t round = 1; round <= cfg.rounds; ++round) {
        RoundMetrics rm;
        rm.round = round;

        std::vector<ModelUpdate> updates;
        for (std::size_t i = 0; i < n_clients; ++i) {
            const int id = static_cast<int>(i) + 1;
            if (profiles[id].blocked) {
                rm.client_status[id] = ClientStatus::blocked;
                continue;
            }
            MlpModel local = model;
            local.unflatten(global);
            AdamState adam(cfg.learning_rate, local.parameter_count());
            train_local(local, client_data[i], cfg.local_epochs, cfg.batch_size, adam,
                        derive_seed(cfg.master_seed, static_cast<std::uint64_t>(id), round, "batch"));
            ParameterVector params = local.flatten();

            auto bit = cfg.behaviors.find(id);
            if (bit != cfg.behaviors.end() && bit->second.kind == BehaviorKind::faulty_noise) {
                Rng rng(derive_seed(cfg.master_seed, static_cast<std::uint64_t>(id), round, "noise"));
                params = noise_params(params, bit->second.noise_std, rng);
            }

            if (cfg.privacy == PrivacyMode::dp) {
                Rng rng(derive_seed(cfg.master_seed, static_cast<std::uint64_t>(id), round, "dp"));
                auto sparse = dp_release(params, global, cfg.dp_cfg, rng);
                params = apply_sparse_update(global, sparse);
            }
            ensure_finite(params, "client update");
            updates.push_back({id, std::move(params), client_data[i].rows()});
        }

        if (updates.empty()) {
            result.terminated_all_blocked = true;
            result.metadata["terminal_event"] = "all clients blocked at round " + std::to_string(round);
            break;
        }

        std::vector<int> accepted_ids, rejected_ids;
        switch (cfg.strategy) {
            case Strategy::fedavg:
                global = fedavg(updates);
                for (const auto& u : updates) accepted_ids.push_back(u.client_id);
                break;
            case Strategy::comed:
                global = comed(updates);
                for (const auto& u : updates) accepted_ids.push_back(u.client_id);
                break;
            case Strategy::mkrum: {
                MkrumConfig mc = cfg.mkrum_cfg;
                mc.m = std::min(mc.m, updates.size());
                auto [agg, ids] = mkrum(updates, mc, cfg.assumed_bad);
                global = std::move(agg);
                accepted_ids = ids;
                for (const auto& u : updates) {
                    if (std::find(ids.begin(), ids.end(), u.client_id) == ids.end()) {
                        rejected_ids.push_back(u.client_id);
                    }
                }
                break;
            }
            case Strategy::afa: {
                auto afa = afa_round(updates, global, profiles, cfg.afa_cfg);
                global = std::move(afa.global);
                accepted_ids = afa.accepted;
                rejected_ids = afa.rejected;
                for (int id : afa.newly_blocked) {
                    rm.block_events.emplace_back(round, id);
                    result.block_events.emplace_back(round, id);
                }
                break;
            }
        }

        for (int id : accepted_ids) rm.client_status[id] = ClientStatus::accepted;
        for (int id : rejected_ids) rm.client_status[id] = ClientStatus::rejected;

        eval_model.unflatten(global);
        auto [err, loss] = evaluate(eval_model, test);
        rm.test_error = err;
        rm.test_loss = loss;
        result.rounds.push_back(std::move(rm));
    }

    return result;
}

// CSV: one row per round; id lists are ';'-separated within a cell.
inline std::string metrics_to_csv(const RunResult& res, Strategy strategy) {
    std::ostringstream out;
    out << "round,strategy,test_error,test_loss,accepted_ids,rejected_ids,blocked_ids\n";
    auto join = [](const std::vector<int>& ids) {
        std::string s;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (i) s += ';';
            s += std::to_string(ids[i]);
        }
        return s;
    };
    char buf[64];
    for (const auto& rm : res.rounds) {
        std::vector<int> acc, rej, blk;
        for (const auto& [id, st] : rm.client_status) {
            if (st == ClientStatus::accepted) acc.push_back(id);
            else if (st == ClientStatus::rejected) rej.push_back(id);
            else if (st == ClientStatus::blocked) blk.push_back(id);
        }
        out << rm.round << ',' << to_string(strategy) << ',';
        std::snprintf(buf, sizeof buf, "%.17g", rm.test_error);
        out << buf << ',';
        std::snprintf(buf, sizeof buf, "%.17g", rm.test_loss);
        out << buf << ',' << join(acc) << ',' << join(rej) << ',' << join(blk) << '\n';
    }
    return out.str();
}

} // namespace fedsim

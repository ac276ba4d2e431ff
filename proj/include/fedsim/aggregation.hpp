// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "fedsim/nn.hpp"

namespace fedsim {

// A client's submitted parameters plus its training sample count.
struct ModelUpdate {
    int client_id = 0;
    ParameterVector params;
    std::size_t sample_count = 1;
};

namespace detail {

inline void check_updates(const std::vector<ModelUpdate>& updates) {
    if (updates.empty()) throw std::invalid_argument("aggregation: no updates");
    const std::size_t len = updates.front().params.size();
    for (const auto& u : updates) {
        if (u.params.size() != len) throw std::invalid_argument("aggregation: length mismatch");
        if (u.sample_count == 0) throw std::invalid_argument("aggregation: sample_count must be >= 1");
    }
}

} // namespace detail

// FedAvg: theta_g = sum_i (d_i / d) theta_i
inline ParameterVector fedavg(const std::vector<ModelUpdate>& updates) {
    detail::check_updates(updates);
    const std::size_t len = updates.front().params.size();
    double total = 0.0;
    for (const auto& u : updates) total += static_cast<double>(u.sample_count);
    ParameterVector out(len, 0.0);
    for (const auto& u : updates) {
        const double w = static_cast<double>(u.sample_count) / total;
        for (std::size_t i = 0; i < len; ++i) out[i] += w * u.params[i];
    }
    return out;
}

// Coordinate-wise median; sample counts are ignored. Even count takes the
// mean of the two central order statistics.
inline ParameterVector comed(const std::vector<ModelUpdate>& updates) {
    detail::check_updates(updates);
    const std::size_t n = updates.size();
    const std::size_t len = updates.front().params.size();
    ParameterVector out(len);
    std::vector<double> col(n);
    for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t k = 0; k < n; ++k) col[k] = updates[k].params[i];
        const std::size_t mid = n / 2;
        std::nth_element(col.begin(), col.begin() + mid, col.end());
        if (n % 2 == 1) {
            out[i] = col[mid];
        } else {
            const double hi = col[mid];
            const double lo = *std::max_element(col.begin(), col.begin() + mid);
            out[i] = 0.5 * (lo + hi);
        }
    }
    return out;
}

enum class KrumNeighborMode { all_pairs, truncated };

struct MkrumConfig {
    std::size_t m = 1;
    KrumNeighborMode neighbor_mode = KrumNeighborMode::all_pairs;
};

// Krum scores s_i. all_pairs sums squared distances to every other update;
// truncated sums only the n - f - 2 smallest (original Krum).
inline std::vector<std::pair<int, double>> krum_scores(const std::vector<ModelUpdate>& updates,
                                                       KrumNeighborMode mode, std::size_t f = 0) {
    detail::check_updates(updates);
    const std::size_t n = updates.size();
    if (n < 2) throw std::invalid_argument("krum_scores: need at least 2 updates");
    std::size_t keep = n - 1;
    if (mode == KrumNeighborMode::truncated) {
        if (n < f + 3) throw std::invalid_argument("krum_scores: truncated mode needs n - f - 2 >= 1");
        keep = n - f - 2;
    }
    const std::size_t len = updates.front().params.size();

    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            const double* a = updates[i].params.data();
            const double* b = updates[j].params.data();
            for (std::size_t k = 0; k < len; ++k) {
                const double d = a[k] - b[k];
                s += d * d;
            }
            dist[i * n + j] = dist[j * n + i] = s;
        }
    }

    std::vector<std::pair<int, double>> scores;
    scores.reserve(n);
    std::vector<double> row;
    for (std::size_t i = 0; i < n; ++i) {
        row.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) row.push_back(dist[i * n + j]);
        }
        std::sort(row.begin(), row.end());
        double s = 0.0;
        for (std::size_t k = 0; k < keep; ++k) s += row[k];
        scores.emplace_back(updates[i].client_id, s);
    }
    return scores;
}

// Selects the m lowest-score clients (ties by lower client_id), then FedAvg
// over the selected subset.
inline std::pair<ParameterVector, std::vector<int>> mkrum(const std::vector<ModelUpdate>& updates,
                                                          const MkrumConfig& cfg, std::size_t f = 0) {
    if (cfg.m == 0 || cfg.m > updates.size()) {
        throw std::invalid_argument("mkrum: m must be in [1, n]");
    }
    if (updates.size() == 1) {
        detail::check_updates(updates);
        return {updates.front().params, {updates.front().client_id}};
    }
    auto scores = krum_scores(updates, cfg.neighbor_mode, f);
    std::vector<std::size_t> order(updates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a].second != scores[b].second) return scores[a].second < scores[b].second;
        return scores[a].first < scores[b].first;
    });
    std::vector<ModelUpdate> selected;
    std::vector<int> ids;
    for (std::size_t k = 0; k < cfg.m; ++k) {
        selected.push_back(updates[order[k]]);
        ids.push_back(scores[order[k]].first);
    }
    std::sort(ids.begin(), ids.end());
    return {fedavg(selected), ids};
}

// AFA reputation state. reputation = alpha / (alpha + beta) always.
struct ClientProfile {
    int client_id = 0;
    double alpha = 3.0;
    double beta = 3.0;
    bool blocked = false;

    double reputation() const { return alpha / (alpha + beta); }
};

struct AfaConfig {
    double xi = 2.0;
    double delta_xi = 0.5;
    double block_threshold = 0.25;
    double alpha0 = 3.0;
    double beta0 = 3.0;
};

struct AfaResult {
    ParameterVector global;
    std::vector<int> accepted;
    std::vector<int> rejected;
    std::vector<int> newly_blocked;
    bool degenerate_fallback = false; // every client was flagged; kept the best one
};

namespace detail {

inline double cosine_similarity(const ParameterVector& a, const ParameterVector& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = std::sqrt(na) * std::sqrt(nb);
    return denom > 0.0 ? dot / denom : 0.0;
}

inline ParameterVector reputation_weighted_average(const std::vector<const ModelUpdate*>& updates,
                                                   const std::unordered_map<int, ClientProfile>& profiles) {
    const std::size_t len = updates.front()->params.size();
    double total = 0.0;
    for (const auto* u : updates) {
        total += profiles.at(u->client_id).reputation() * static_cast<double>(u->sample_count);
    }
    ParameterVector out(len, 0.0);
    for (const auto* u : updates) {
        const double w =
            profiles.at(u->client_id).reputation() * static_cast<double>(u->sample_count) / total;
        for (std::size_t i = 0; i < len; ++i) out[i] += w * u->params[i];
    }
    return out;
}

} // namespace detail

// One AFA aggregation round: iterative similarity-based outlier rejection
// around the reputation-weighted average, then a Beta-Bernoulli reputation
// update with permanent blocking below block_threshold.
inline AfaResult afa_round(const std::vector<ModelUpdate>& updates,
                           const ParameterVector& /*previous_global*/,
                           std::unordered_map<int, ClientProfile>& profiles, const AfaConfig& cfg) {
    detail::check_updates(updates);
    for (const auto& u : updates) {
        auto it = profiles.find(u.client_id);
        if (it == profiles.end()) {
            profiles[u.client_id] = ClientProfile{u.client_id, cfg.alpha0, cfg.beta0, false};
        } else if (it->second.blocked) {
            throw std::invalid_argument("afa_round: update from a blocked client");
        }
    }

    std::vector<const ModelUpdate*> accepted;
    for (const auto& u : updates) accepted.push_back(&u);
    std::vector<const ModelUpdate*> rejected;

    double xi = cfg.xi;
    ParameterVector candidate;
    AfaResult res;

    while (true) {
        candidate = detail::reputation_weighted_average(accepted, profiles);
        std::vector<double> sims(accepted.size());
        for (std::size_t i = 0; i < accepted.size(); ++i) {
            sims[i] = detail::cosine_similarity(accepted[i]->params, candidate);
        }
        if (accepted.size() <= 1) break;

        std::vector<double> sorted = sims;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        const double median =
            n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        double mean = 0.0;
        for (double s : sims) mean += s;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double s : sims) var += (s - mean) * (s - mean);
        const double sd = std::sqrt(var / static_cast<double>(n));

        // one-sided cut toward the bad tail
        std::vector<const ModelUpdate*> keep, drop;
        for (std::size_t i = 0; i < accepted.size(); ++i) {
            const bool out = mean < median ? sims[i] < mean - xi * sd : sims[i] > mean + xi * sd;
            (out ? drop : keep).push_back(accepted[i]);
        }
        if (drop.empty()) break;
        if (keep.empty()) {
            // degenerate: keep the single highest-similarity client
            std::size_t best = 0;
            for (std::size_t i = 1; i < accepted.size(); ++i) {
                if (sims[i] > sims[best]) best = i;
            }
            res.degenerate_fallback = true;
            for (std::size_t i = 0; i < accepted.size(); ++i) {
                if (i != best) rejected.push_back(accepted[i]);
            }
            accepted = {accepted[best]};
            candidate = detail::reputation_weighted_average(accepted, profiles);
            break;
        }
        rejected.insert(rejected.end(), drop.begin(), drop.end());
        accepted = keep;
        xi += cfg.delta_xi;
    }

    res.global = std::move(candidate);
    for (const auto* u : accepted) res.accepted.push_back(u->client_id);
    for (const auto* u : rejected) res.rejected.push_back(u->client_id);
    std::sort(res.accepted.begin(), res.accepted.end());
    std::sort(res.rejected.begin(), res.rejected.end());

    for (int id : res.accepted) profiles[id].alpha += 1.0;
    for (int id : res.rejected) profiles[id].beta += 1.0;
    for (int id : res.rejected) {
        auto& p = profiles[id];
        if (!p.blocked && p.reputation() < cfg.block_threshold) {
            p.blocked = true;
            res.newly_blocked.push_back(id);
        }
    }
    std::sort(res.newly_blocked.begin(), res.newly_blocked.end());
    return res;
}

// Drop updates from blocked clients before any aggregation.
inline std::vector<ModelUpdate> filter_blocked(const std::vector<ModelUpdate>& updates,
                                               const std::unordered_map<int, ClientProfile>& profiles) {
    std::vector<ModelUpdate> out;
    for (const auto& u : updates) {
        auto it = profiles.find(u.client_id);
        if (it == profiles.end() || !it->second.blocked) out.push_back(u);
    }
    return out;
}

} // namespace fedsim

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsim/data.hpp"

namespace fedsim {

struct KAnonConfig {
    std::size_t k = 1;
    std::vector<std::string> quasi_identifiers;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double representative() const { return 0.5 * (lo + hi); }
    bool contains(double v) const { return v >= lo && v <= hi; }
};

// Per quasi-identifier column: ordered disjoint intervals covering the
// observed range, each replaced by its midpoint on application.
struct GeneralizationMapping {
    std::map<std::string, std::vector<Interval>> columns;

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [name, intervals] : columns) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& iv : intervals) {
                arr.push_back({iv.lo, iv.hi, iv.representative()});
            }
            j[name] = arr;
        }
        return j;
    }

    static GeneralizationMapping from_json(const nlohmann::json& j) {
        GeneralizationMapping m;
        for (auto it = j.begin(); it != j.end(); ++it) {
            std::vector<Interval> intervals;
            for (const auto& triple : it.value()) {
                intervals.push_back({triple.at(0).get<double>(), triple.at(1).get<double>()});
            }
            m.columns[it.key()] = std::move(intervals);
        }
        return m;
    }
};

namespace detail {

inline std::size_t interval_index(const std::vector<Interval>& intervals, double v) {
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        if (intervals[i].contains(v)) return i;
    }
    // clamp to the nearest interval
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        const double d = v < intervals[i].lo ? intervals[i].lo - v : v - intervals[i].hi;
        if (d < best_dist) {
            best_dist = d;
            best = i;
        }
    }
    return best;
}

// smallest joint-tuple frequency over the QI columns given per-column bins
inline std::size_t min_joint_frequency(const std::vector<std::vector<std::size_t>>& row_bins,
                                       std::size_t n_rows) {
    std::map<std::vector<std::size_t>, std::size_t> freq;
    std::vector<std::size_t> key(row_bins.size());
    for (std::size_t r = 0; r < n_rows; ++r) {
        for (std::size_t c = 0; c < row_bins.size(); ++c) key[c] = row_bins[c][r];
        ++freq[key];
    }
    std::size_t mn = n_rows;
    for (const auto& [k, v] : freq) mn = std::min(mn, v);
    return mn;
}

} // namespace detail

// Greedy adjacent-interval merging per QI column until every joint QI tuple
// occurs at least k times. Starts from unit-width bins (one per distinct
// value); each merge step picks the column and adjacent pair that most
// improves the minimum joint frequency, favoring low-count pairs.
inline GeneralizationMapping fit_k_anonymity(const TabularDataset& train, const KAnonConfig& cfg) {
    if (cfg.k == 0) throw std::invalid_argument("k must be >= 1");
    if (cfg.k > train.rows()) throw std::invalid_argument("k exceeds row count");
    if (cfg.quasi_identifiers.empty()) throw std::invalid_argument("no quasi-identifiers given");

    const std::size_t n = train.rows();
    const std::size_t qn = cfg.quasi_identifiers.size();

    std::vector<std::size_t> col_idx(qn);
    for (std::size_t c = 0; c < qn; ++c) col_idx[c] = train.column_index(cfg.quasi_identifiers[c]);

    // unit intervals over distinct observed values
    std::vector<std::vector<Interval>> intervals(qn);
    std::vector<std::vector<double>> col_values(qn);
    for (std::size_t c = 0; c < qn; ++c) {
        std::vector<double> vals;
        vals.reserve(n);
        for (std::size_t r = 0; r < n; ++r) vals.push_back(train.at(r, col_idx[c]));
        col_values[c] = vals;
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (double v : vals) intervals[c].push_back({v, v});
    }

    auto assign_bins = [&](std::size_t c) {
        std::vector<std::size_t> bins(n);
        for (std::size_t r = 0; r < n; ++r) {
            bins[r] = detail::interval_index(intervals[c], col_values[c][r]);
        }
        return bins;
    };

    std::vector<std::vector<std::size_t>> row_bins(qn);
    for (std::size_t c = 0; c < qn; ++c) row_bins[c] = assign_bins(c);

    while (detail::min_joint_frequency(row_bins, n) < cfg.k) {
        // candidate per column: merge the adjacent pair with the smallest
        // combined marginal count (ties to the lower index)
        std::size_t best_col = qn, best_pair = 0, best_result = 0;
        for (std::size_t c = 0; c < qn; ++c) {
            if (intervals[c].size() < 2) continue;
            std::vector<std::size_t> counts(intervals[c].size(), 0);
            for (std::size_t r = 0; r < n; ++r) ++counts[row_bins[c][r]];
            std::size_t pair = 0;
            std::size_t pair_count = counts[0] + counts[1];
            for (std::size_t i = 1; i + 1 < counts.size(); ++i) {
                if (counts[i] + counts[i + 1] < pair_count) {
                    pair_count = counts[i] + counts[i + 1];
                    pair = i;
                }
            }
            // evaluate the merge
            auto trial = intervals[c];
            trial[pair].hi = trial[pair + 1].hi;
            trial.erase(trial.begin() + pair + 1);
            auto saved = std::move(intervals[c]);
            intervals[c] = std::move(trial);
            auto trial_bins = assign_bins(c);
            auto saved_bins = std::move(row_bins[c]);
            row_bins[c] = std::move(trial_bins);
            const std::size_t result = detail::min_joint_frequency(row_bins, n);
            row_bins[c] = std::move(saved_bins);
            intervals[c] = std::move(saved);

            const bool better =
                best_col == qn || result > best_result ||
                (result == best_result && intervals[c].size() > intervals[best_col].size());
            if (better) {
                best_col = c;
                best_pair = pair;
                best_result = result;
            }
        }
        if (best_col == qn) break; // every column is a single interval already
        intervals[best_col][best_pair].hi = intervals[best_col][best_pair + 1].hi;
        intervals[best_col].erase(intervals[best_col].begin() + best_pair + 1);
        row_bins[best_col] = assign_bins(best_col);
    }

    GeneralizationMapping mapping;
    for (std::size_t c = 0; c < qn; ++c) mapping.columns[cfg.quasi_identifiers[c]] = intervals[c];
    return mapping;
}

// Replace each QI value by its interval midpoint; out-of-range values clamp
// to the nearest interval.
inline TabularDataset apply_mapping(const TabularDataset& data, const GeneralizationMapping& mapping) {
    TabularDataset out = data;
    for (const auto& [name, intervals] : mapping.columns) {
        const std::size_t c = out.column_index(name); // throws if the column is missing
        if (intervals.empty()) throw std::invalid_argument("empty mapping for column " + name);
        for (std::size_t r = 0; r < out.rows(); ++r) {
            const std::size_t i = detail::interval_index(intervals, out.at(r, c));
            out.at(r, c) = intervals[i].representative();
        }
    }
    return out;
}

// Aggregator-side merge: the union of all client interval boundaries per
// column, re-merged greedily so every joint QI tuple in the reference
// (test) set still occurs at least k times.
inline GeneralizationMapping merge_mappings(const std::vector<GeneralizationMapping>& mappings,
                                            const TabularDataset& reference, const KAnonConfig& cfg) {
    if (mappings.empty()) throw std::invalid_argument("merge_mappings: no mappings");

    GeneralizationMapping merged;
    for (const auto& name : cfg.quasi_identifiers) {
        std::vector<double> bounds;
        for (const auto& m : mappings) {
            auto it = m.columns.find(name);
            if (it == m.columns.end()) throw std::invalid_argument("mapping missing column " + name);
            for (const auto& iv : it->second) {
                bounds.push_back(iv.lo);
                bounds.push_back(iv.hi);
            }
        }
        std::sort(bounds.begin(), bounds.end());
        bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
        std::vector<Interval> intervals;
        for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
            intervals.push_back({bounds[i], bounds[i + 1]});
        }
        if (intervals.empty()) intervals.push_back({bounds.front(), bounds.front()});
        merged.columns[name] = std::move(intervals);
    }

    // re-enforce the frequency floor against the reference set
    const std::size_t n = reference.rows();
    const std::size_t k = std::min(cfg.k, n);
    std::vector<std::size_t> col_idx;
    for (const auto& name : cfg.quasi_identifiers) col_idx.push_back(reference.column_index(name));

    auto joint_min = [&]() {
        std::vector<std::vector<std::size_t>> row_bins(cfg.quasi_identifiers.size());
        for (std::size_t c = 0; c < cfg.quasi_identifiers.size(); ++c) {
            const auto& ivs = merged.columns[cfg.quasi_identifiers[c]];
            row_bins[c].resize(n);
            for (std::size_t r = 0; r < n; ++r) {
                row_bins[c][r] = detail::interval_index(ivs, reference.at(r, col_idx[c]));
            }
        }
        return detail::min_joint_frequency(row_bins, n);
    };

    while (joint_min() < k) {
        // merge the widest column's lowest-count adjacent pair
        std::size_t best_c = cfg.quasi_identifiers.size();
        for (std::size_t c = 0; c < cfg.quasi_identifiers.size(); ++c) {
            const auto& ivs = merged.columns[cfg.quasi_identifiers[c]];
            if (ivs.size() < 2) continue;
            if (best_c == cfg.quasi_identifiers.size() ||
                ivs.size() > merged.columns[cfg.quasi_identifiers[best_c]].size()) {
                best_c = c;
            }
        }
        if (best_c == cfg.quasi_identifiers.size()) break;
        auto& ivs = merged.columns[cfg.quasi_identifiers[best_c]];
        std::vector<std::size_t> counts(ivs.size(), 0);
        for (std::size_t r = 0; r < n; ++r) {
            ++counts[detail::interval_index(ivs, reference.at(r, col_idx[best_c]))];
        }
        std::size_t pair = 0;
        std::size_t pair_count = counts[0] + counts[1];
        for (std::size_t i = 1; i + 1 < counts.size(); ++i) {
            if (counts[i] + counts[i + 1] < pair_count) {
                pair_count = counts[i] + counts[i + 1];
                pair = i;
            }
        }
        ivs[pair].hi = ivs[pair + 1].hi;
        ivs.erase(ivs.begin() + pair + 1);
    }
    return merged;
}

// Direct count of the k-anonymity frequency property after generalization.
inline std::size_t min_qi_tuple_frequency(const TabularDataset& data,
                                          const std::vector<std::string>& quasi_identifiers) {
    std::map<std::vector<double>, std::size_t> freq;
    std::vector<std::size_t> col_idx;
    for (const auto& name : quasi_identifiers) col_idx.push_back(data.column_index(name));
    std::vector<double> key(col_idx.size());
    for (std::size_t r = 0; r < data.rows(); ++r) {
        for (std::size_t c = 0; c < col_idx.size(); ++c) key[c] = data.at(r, col_idx[c]);
        ++freq[key];
    }
    std::size_t mn = data.rows();
    for (const auto& [k2, v] : freq) mn = std::min(mn, v);
    return mn;
}

} // namespace fedsim

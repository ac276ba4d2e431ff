// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsim/rng.hpp"

namespace fedsim {

struct ColumnSchema {
    std::string name;
    bool quasi_identifier = false;
};

// Row-major feature matrix plus binary labels and a column schema.
struct TabularDataset {
    std::vector<double> features;
    std::size_t n_cols = 0;
    std::vector<int> labels;
    std::vector<ColumnSchema> schema;

    std::size_t rows() const { return n_cols == 0 ? 0 : features.size() / n_cols; }

    double at(std::size_t r, std::size_t c) const { return features[r * n_cols + c]; }
    double& at(std::size_t r, std::size_t c) { return features[r * n_cols + c]; }

    const double* row(std::size_t r) const { return features.data() + r * n_cols; }

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < schema.size(); ++i) {
            if (schema[i].name == name) return i;
        }
        throw std::invalid_argument("no such column: " + name);
    }

    TabularDataset take_rows(const std::vector<std::size_t>& idx) const {
        TabularDataset out;
        out.n_cols = n_cols;
        out.schema = schema;
        out.features.reserve(idx.size() * n_cols);
        out.labels.reserve(idx.size());
        for (std::size_t r : idx) {
            out.features.insert(out.features.end(), row(r), row(r) + n_cols);
            out.labels.push_back(labels[r]);
        }
        return out;
    }
};

struct PartitionPlan {
    std::vector<std::size_t> client_sizes;
    std::uint64_t seed = 0;
};

struct IngestionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

struct RawCsv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline RawCsv read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open file: " + path);
    RawCsv csv;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (first) {
            csv.header = std::move(cells);
            first = false;
        } else {
            csv.rows.push_back(std::move(cells));
        }
    }
    if (first) throw IngestionError("empty file: " + path);
    return csv;
}

inline double parse_cell(const std::string& s, std::size_t row, std::size_t col) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        if (!std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw IngestionError("non-numeric cell '" + s + "' at row " + std::to_string(row + 1) +
                             ", column " + std::to_string(col + 1));
    }
}

} // namespace detail

// Pima Indians Diabetes: 8 numeric features + binary "Outcome" label.
// Age and Pregnancies are flagged as quasi-identifiers.
inline TabularDataset load_pima(const std::string& path) {
    auto csv = detail::read_csv(path);
    if (csv.header.size() != 9) {
        throw IngestionError("expected 9 columns (8 features + Outcome), got " +
                             std::to_string(csv.header.size()));
    }
    if (csv.header.back() != "Outcome") {
        throw IngestionError("expected last column 'Outcome', got '" + csv.header.back() + "'");
    }
    TabularDataset ds;
    ds.n_cols = 8;
    for (std::size_t c = 0; c < 8; ++c) {
        const std::string& name = csv.header[c];
        ds.schema.push_back({name, name == "Age" || name == "Pregnancies"});
    }
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& cells = csv.rows[r];
        if (cells.size() != 9) {
            throw IngestionError("row " + std::to_string(r + 1) + " has " +
                                 std::to_string(cells.size()) + " cells, expected 9");
        }
        for (std::size_t c = 0; c < 8; ++c) {
            ds.features.push_back(detail::parse_cell(cells[c], r, c));
        }
        double y = detail::parse_cell(cells[8], r, 8);
        if (y != 0.0 && y != 1.0) {
            throw IngestionError("non-binary label '" + cells[8] + "' at row " + std::to_string(r + 1));
        }
        ds.labels.push_back(static_cast<int>(y));
    }
    if (ds.labels.empty()) throw IngestionError("no data rows in " + path);
    return ds;
}

// Processed Cleveland heart disease file: 13 numeric features + target.
// Rows containing "?" are dropped; target values 1-4 collapse to class 1.
// Age and sex are flagged as quasi-identifiers.
inline TabularDataset load_heart(const std::string& path) {
    auto csv = detail::read_csv(path);
    if (csv.header.size() != 14) {
        throw IngestionError("expected 14 columns (13 features + target), got " +
                             std::to_string(csv.header.size()));
    }
    TabularDataset ds;
    ds.n_cols = 13;
    for (std::size_t c = 0; c < 13; ++c) {
        const std::string& name = csv.header[c];
        ds.schema.push_back({name, name == "age" || name == "sex"});
    }
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& cells = csv.rows[r];
        if (cells.size() != 14) {
            throw IngestionError("row " + std::to_string(r + 1) + " has " +
                                 std::to_string(cells.size()) + " cells, expected 14");
        }
        bool missing = false;
        for (const auto& cell : cells) {
            if (cell == "?") { missing = true; break; }
        }
        if (missing) continue;
        for (std::size_t c = 0; c < 13; ++c) {
            ds.features.push_back(detail::parse_cell(cells[c], r, c));
        }
        double t = detail::parse_cell(cells[13], r, 13);
        if (t < 0.0 || t > 4.0 || t != std::floor(t)) {
            throw IngestionError("invalid target '" + cells[13] + "' at row " + std::to_string(r + 1));
        }
        ds.labels.push_back(t > 0.0 ? 1 : 0);
    }
    if (ds.labels.empty()) throw IngestionError("no usable rows in " + path + " (all missing?)");
    return ds;
}

// Seeded shuffle, then take the first train_count rows as the training set
// and the next test_count as the test set (0 = the whole remainder). Rows
// beyond train_count + test_count are left unused.
inline std::pair<TabularDataset, TabularDataset> split(const TabularDataset& data,
                                                       std::size_t train_count,
                                                       std::uint64_t seed,
                                                       std::size_t test_count = 0) {
    const std::size_t n = data.rows();
    if (train_count == 0 || train_count >= n) {
        throw std::invalid_argument("train_count must be in (0, rows)");
    }
    if (test_count == 0) test_count = n - train_count;
    if (train_count + test_count > n) {
        throw std::invalid_argument("train_count + test_count exceeds row count");
    }
    Rng rng(seed);
    auto perm = rng.permutation(n);
    std::vector<std::size_t> train_idx(perm.begin(), perm.begin() + train_count);
    std::vector<std::size_t> test_idx(perm.begin() + train_count,
                                      perm.begin() + train_count + test_count);
    return {data.take_rows(train_idx), data.take_rows(test_idx)};
}

// Seeded shuffle then contiguous slicing by client_sizes; disjoint cover.
inline std::vector<TabularDataset> partition(const TabularDataset& train, const PartitionPlan& plan) {
    const std::size_t total = std::accumulate(plan.client_sizes.begin(), plan.client_sizes.end(),
                                              std::size_t{0});
    if (total != train.rows()) {
        throw std::invalid_argument("partition plan sums to " + std::to_string(total) +
                                    ", training set has " + std::to_string(train.rows()) + " rows");
    }
    Rng rng(plan.seed);
    auto perm = rng.permutation(train.rows());
    std::vector<TabularDataset> out;
    out.reserve(plan.client_sizes.size());
    std::size_t offset = 0;
    for (std::size_t sz : plan.client_sizes) {
        if (sz == 0) throw std::invalid_argument("client sizes must be positive");
        std::vector<std::size_t> idx(perm.begin() + offset, perm.begin() + offset + sz);
        out.push_back(train.take_rows(idx));
        offset += sz;
    }
    return out;
}

struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> stddev; // population std; 0 marks a zero-variance column
};

inline NormalizationStats fit_normalization(const TabularDataset& train) {
    if (train.rows() == 0) throw std::invalid_argument("normalize: empty training set");
    const std::size_t n = train.rows(), p = train.n_cols;
    NormalizationStats st;
    st.mean.assign(p, 0.0);
    st.stddev.assign(p, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < p; ++c) st.mean[c] += train.at(r, c);
    }
    for (std::size_t c = 0; c < p; ++c) st.mean[c] /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < p; ++c) {
            const double d = train.at(r, c) - st.mean[c];
            st.stddev[c] += d * d;
        }
    }
    for (std::size_t c = 0; c < p; ++c) st.stddev[c] = std::sqrt(st.stddev[c] / static_cast<double>(n));
    return st;
}

inline void apply_normalization(TabularDataset& ds, const NormalizationStats& st) {
    if (ds.n_cols != st.mean.size()) throw std::invalid_argument("normalization stats shape mismatch");
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        for (std::size_t c = 0; c < ds.n_cols; ++c) {
            ds.at(r, c) = st.stddev[c] > 0.0 ? (ds.at(r, c) - st.mean[c]) / st.stddev[c] : 0.0;
        }
    }
}

// Per-column z-score with train statistics only; test reuses the same stats.
inline NormalizationStats normalize(TabularDataset& train, TabularDataset& test) {
    auto st = fit_normalization(train);
    apply_normalization(train, st);
    apply_normalization(test, st);
    return st;
}

} // namespace fedsim

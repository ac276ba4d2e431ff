// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "fedsim/nn.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

constexpr double kInfiniteEpsilon = std::numeric_limits<double>::infinity();

// How a Laplace scale is derived from an epsilon.
//   svt_scaled:   b = 2 * c * s / eps  (sparse-vector-technique scales)
//   direct_scale: b = eps              (the epsilon value is used as the
//                                       scale itself; the parameterization
//                                       the reported experiments follow)
enum class DpNoiseModel { svt_scaled, direct_scale };

struct DpConfig {
    double gamma = 10.0;        // clipping threshold
    double sensitivity = 20.0;  // s; default 2 * gamma
    double release_fraction = 0.1; // Q in (0, 1]
    double epsilon1 = kInfiniteEpsilon;
    double epsilon2 = kInfiniteEpsilon;
    double epsilon3 = kInfiniteEpsilon;
    DpNoiseModel noise_model = DpNoiseModel::svt_scaled;

    void validate() const {
        if (!(gamma > 0.0)) throw std::invalid_argument("dp: gamma must be positive");
        if (!(sensitivity > 0.0)) throw std::invalid_argument("dp: sensitivity must be positive");
        if (!(release_fraction > 0.0) || release_fraction > 1.0) {
            throw std::invalid_argument("dp: release_fraction must be in (0, 1]");
        }
        for (double e : {epsilon1, epsilon2, epsilon3}) {
            if (!(e > 0.0)) throw std::invalid_argument("dp: epsilons must be positive or infinite");
        }
    }

    bool noiseless() const {
        return std::isinf(epsilon1) && std::isinf(epsilon2) && std::isinf(epsilon3);
    }
};

// Released subset of a parameter delta; indices strictly increasing.
struct SparseUpdate {
    std::vector<std::size_t> indices;
    std::vector<double> values;
    std::size_t total_length = 0;
};

inline double laplace_sample(double scale, Rng& rng) { return rng.laplace(scale); }

inline ParameterVector clip(const ParameterVector& delta, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("clip: gamma must be positive");
    ParameterVector out = delta;
    for (double& x : out) x = std::clamp(x, -gamma, gamma);
    return out;
}

namespace detail {

inline double dp_scale(const DpConfig& cfg, double eps, std::size_t release_count) {
    if (std::isinf(eps)) return 0.0;
    if (cfg.noise_model == DpNoiseModel::direct_scale) return eps;
    return 2.0 * static_cast<double>(release_count) * cfg.sensitivity / eps;
}

inline double noisy(double scale, Rng& rng) { return scale > 0.0 ? rng.laplace(scale) : 0.0; }

} // namespace detail

// Client-side partial parameter release: clip the delta against the global
// reference, then noisily select up to c = ceil(Q * length) components
// against a noisy magnitude-quantile threshold, and release each selected
// delta with output noise, re-clipped to [-gamma, gamma].
// With every epsilon infinite the selection is exactly top-c by magnitude
// and the values are the clipped deltas themselves.
inline SparseUpdate dp_release(const ParameterVector& local, const ParameterVector& global_ref,
                               const DpConfig& cfg, Rng& rng) {
    cfg.validate();
    if (local.size() != global_ref.size()) {
        throw std::invalid_argument("dp_release: length mismatch");
    }
    const std::size_t len = local.size();
    ParameterVector delta(len);
    for (std::size_t i = 0; i < len; ++i) delta[i] = local[i] - global_ref[i];
    delta = clip(delta, cfg.gamma);

    const auto c = static_cast<std::size_t>(
        std::ceil(cfg.release_fraction * static_cast<double>(len)));

    SparseUpdate out;
    out.total_length = len;

    if (cfg.noiseless()) {
        std::vector<std::size_t> order(len);
        for (std::size_t i = 0; i < len; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double ma = std::fabs(delta[a]), mb = std::fabs(delta[b]);
            if (ma != mb) return ma > mb;
            return a < b;
        });
        order.resize(std::min(c, len));
        std::sort(order.begin(), order.end());
        for (std::size_t i : order) {
            out.indices.push_back(i);
            out.values.push_back(delta[i]);
        }
        return out;
    }

    // threshold tau: the (1 - Q)-quantile of |clipped delta|
    std::vector<double> mags(len);
    for (std::size_t i = 0; i < len; ++i) mags[i] = std::fabs(delta[i]);
    std::sort(mags.begin(), mags.end());
    const auto qidx = std::min(
        len - 1, static_cast<std::size_t>((1.0 - cfg.release_fraction) * static_cast<double>(len)));
    const double tau = mags[qidx];

    const double b1 = detail::dp_scale(cfg, cfg.epsilon1, c);
    const double b2 = detail::dp_scale(cfg, cfg.epsilon2, c);
    const double b3 = detail::dp_scale(cfg, cfg.epsilon3, c);
    const double noisy_tau = tau + detail::noisy(b2, rng);

    auto visit = rng.permutation(len);
    std::vector<std::size_t> accepted;
    for (std::size_t i : visit) {
        if (accepted.size() >= c) break;
        if (std::fabs(delta[i]) + detail::noisy(b1, rng) >= noisy_tau) accepted.push_back(i);
    }
    std::sort(accepted.begin(), accepted.end());
    for (std::size_t i : accepted) {
        const double v = std::clamp(delta[i] + detail::noisy(b3, rng), -cfg.gamma, cfg.gamma);
        out.indices.push_back(i);
        out.values.push_back(v);
    }
    return out;
}

// Server-side reconstruction: unreleased positions keep the global value.
inline ParameterVector apply_sparse_update(const ParameterVector& global_ref,
                                           const SparseUpdate& update) {
    if (update.total_length != global_ref.size()) {
        throw std::invalid_argument("apply_sparse_update: length mismatch");
    }
    ParameterVector out = global_ref;
    for (std::size_t k = 0; k < update.indices.size(); ++k) {
        out[update.indices[k]] += update.values[k];
    }
    return out;
}

} // namespace fedsim

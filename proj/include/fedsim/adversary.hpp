// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>

#include "fedsim/data.hpp"
#include "fedsim/nn.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

enum class BehaviorKind { honest, malicious_label_flip, faulty_noise };

struct ClientBehavior {
    BehaviorKind kind = BehaviorKind::honest;
    double noise_std = 1.0;     // faulty_noise only
    double flip_fraction = 1.0; // malicious_label_flip only
};

// Label flipping: a seeded sample of ceil(fraction * n) rows gets y -> 1 - y.
// Features are untouched.
inline TabularDataset flip_labels(const TabularDataset& data, double fraction, Rng& rng) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw std::invalid_argument("flip_labels: fraction must be in (0, 1]");
    }
    const std::size_t n = data.rows();
    const auto count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
    auto perm = rng.permutation(n);
    TabularDataset out = data;
    for (std::size_t i = 0; i < count; ++i) {
        out.labels[perm[i]] = 1 - out.labels[perm[i]];
    }
    return out;
}

// Byzantine noise: i.i.d. N(0, noise_std^2) added to every component,
// regenerated fresh each round.
inline ParameterVector noise_params(const ParameterVector& params, double noise_std, Rng& rng) {
    if (!(noise_std > 0.0)) throw std::invalid_argument("noise_params: noise_std must be positive");
    ParameterVector out = params;
    for (double& x : out) x += rng.gaussian(noise_std);
    return out;
}

} // namespace fedsim

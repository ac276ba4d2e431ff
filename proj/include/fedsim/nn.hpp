// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// Flat ordered list of model parameters; the common currency of aggregation.
using ParameterVector = std::vector<double>;

inline void ensure_finite(const ParameterVector& v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
    }
}

struct LayerSpec {
    std::size_t input_width;
    std::size_t output_width;
};

struct BackwardResult {
    ParameterVector grad;
    double loss = 0.0;
};

// Fully-connected network with ReLU between layers and a softmax
// cross-entropy head. Parameters flatten layer by layer, weights
// (row-major, output x input) before biases.
class MlpModel {
public:
    // widths: output width of each layer; the last must be 2
    MlpModel(std::size_t input_width, const std::vector<std::size_t>& widths) {
        if (widths.empty()) throw std::invalid_argument("model needs at least one layer");
        std::size_t in = input_width;
        for (std::size_t w : widths) {
            if (in == 0 || w == 0) throw std::invalid_argument("layer widths must be positive");
            layers_.push_back({in, w});
            in = w;
        }
        if (widths.back() != 2) throw std::invalid_argument("final layer must have width 2");
        weights_.resize(layers_.size());
        biases_.resize(layers_.size());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            weights_[l].assign(layers_[l].input_width * layers_[l].output_width, 0.0);
            biases_[l].assign(layers_[l].output_width, 0.0);
        }
    }

    const std::vector<LayerSpec>& layers() const { return layers_; }
    std::size_t input_width() const { return layers_.front().input_width; }
    std::size_t output_width() const { return layers_.back().output_width; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += l.input_width * l.output_width + l.output_width;
        return n;
    }

    // He-style uniform init, scale sqrt(2 / input_width); biases zero
    void init(Rng& rng) {
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const double limit = std::sqrt(2.0 / static_cast<double>(layers_[l].input_width));
            for (double& w : weights_[l]) w = (2.0 * rng.uniform() - 1.0) * limit;
            std::fill(biases_[l].begin(), biases_[l].end(), 0.0);
        }
    }

    ParameterVector flatten() const {
        ParameterVector v;
        v.reserve(parameter_count());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            v.insert(v.end(), weights_[l].begin(), weights_[l].end());
            v.insert(v.end(), biases_[l].begin(), biases_[l].end());
        }
        return v;
    }

    void unflatten(const ParameterVector& v) {
        if (v.size() != parameter_count()) {
            throw std::invalid_argument("parameter vector length " + std::to_string(v.size()) +
                                        " does not match model size " + std::to_string(parameter_count()));
        }
        std::size_t off = 0;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            std::copy(v.begin() + off, v.begin() + off + weights_[l].size(), weights_[l].begin());
            off += weights_[l].size();
            std::copy(v.begin() + off, v.begin() + off + biases_[l].size(), biases_[l].begin());
            off += biases_[l].size();
        }
    }

    // batch: row-major (rows x input_width) -> class probabilities (rows x 2)
    std::vector<double> forward(const std::vector<double>& batch, std::size_t batch_rows) const {
        check_batch(batch, batch_rows);
        std::vector<std::vector<double>> acts;
        return forward_impl(batch, batch_rows, acts);
    }

    // Mean softmax cross-entropy loss and its gradient in flattened layout.
    BackwardResult backward(const std::vector<double>& batch, std::size_t batch_rows,
                            const std::vector<int>& labels) const {
        check_batch(batch, batch_rows);
        if (batch_rows == 0) throw std::invalid_argument("backward: empty batch");
        if (labels.size() != batch_rows) throw std::invalid_argument("backward: label count mismatch");
        for (int y : labels) {
            if (y != 0 && y != 1) throw std::invalid_argument("backward: labels must be 0 or 1");
        }

        std::vector<std::vector<double>> acts; // post-activation outputs per layer
        std::vector<double> probs = forward_impl(batch, batch_rows, acts);

        const std::size_t L = layers_.size();
        const double inv_n = 1.0 / static_cast<double>(batch_rows);

        double loss = 0.0;
        // dL/dlogits for softmax cross-entropy: (p - onehot) / n
        std::vector<double> delta(batch_rows * 2);
        for (std::size_t r = 0; r < batch_rows; ++r) {
            const double py = probs[r * 2 + labels[r]];
            loss -= std::log(std::max(py, 1e-300));
            delta[r * 2 + 0] = (probs[r * 2 + 0] - (labels[r] == 0 ? 1.0 : 0.0)) * inv_n;
            delta[r * 2 + 1] = (probs[r * 2 + 1] - (labels[r] == 1 ? 1.0 : 0.0)) * inv_n;
        }
        loss *= inv_n;

        std::vector<std::vector<double>> grad_w(L), grad_b(L);
        for (std::size_t l = 0; l < L; ++l) {
            grad_w[l].assign(weights_[l].size(), 0.0);
            grad_b[l].assign(biases_[l].size(), 0.0);
        }

        for (std::size_t l = L; l-- > 0;) {
            const std::size_t in_w = layers_[l].input_width;
            const std::size_t out_w = layers_[l].output_width;
            const std::vector<double>& input = l == 0 ? batch : acts[l - 1];

            for (std::size_t r = 0; r < batch_rows; ++r) {
                const double* x = input.data() + r * in_w;
                const double* d = delta.data() + r * out_w;
                for (std::size_t o = 0; o < out_w; ++o) {
                    grad_b[l][o] += d[o];
                    double* gw = grad_w[l].data() + o * in_w;
                    for (std::size_t i = 0; i < in_w; ++i) gw[i] += d[o] * x[i];
                }
            }

            if (l > 0) {
                // propagate through W^T and the previous ReLU
                std::vector<double> prev(batch_rows * in_w, 0.0);
                for (std::size_t r = 0; r < batch_rows; ++r) {
                    const double* d = delta.data() + r * out_w;
                    double* pd = prev.data() + r * in_w;
                    for (std::size_t o = 0; o < out_w; ++o) {
                        const double* w = weights_[l].data() + o * in_w;
                        for (std::size_t i = 0; i < in_w; ++i) pd[i] += d[o] * w[i];
                    }
                    const double* a = acts[l - 1].data() + r * in_w;
                    for (std::size_t i = 0; i < in_w; ++i) {
                        if (a[i] <= 0.0) pd[i] = 0.0;
                    }
                }
                delta = std::move(prev);
            }
        }

        BackwardResult res;
        res.loss = loss;
        res.grad.reserve(parameter_count());
        for (std::size_t l = 0; l < L; ++l) {
            res.grad.insert(res.grad.end(), grad_w[l].begin(), grad_w[l].end());
            res.grad.insert(res.grad.end(), grad_b[l].begin(), grad_b[l].end());
        }
        return res;
    }

private:
    void check_batch(const std::vector<double>& batch, std::size_t batch_rows) const {
        if (batch.size() != batch_rows * input_width()) {
            throw std::invalid_argument("batch shape does not match model input width");
        }
    }

    std::vector<double> forward_impl(const std::vector<double>& batch, std::size_t batch_rows,
                                     std::vector<std::vector<double>>& acts) const {
        const std::size_t L = layers_.size();
        acts.clear();
        acts.reserve(L > 0 ? L - 1 : 0);
        std::vector<double> cur(batch);
        for (std::size_t l = 0; l < L; ++l) {
            const std::size_t in_w = layers_[l].input_width;
            const std::size_t out_w = layers_[l].output_width;
            std::vector<double> next(batch_rows * out_w);
            for (std::size_t r = 0; r < batch_rows; ++r) {
                const double* x = cur.data() + r * in_w;
                double* y = next.data() + r * out_w;
                for (std::size_t o = 0; o < out_w; ++o) {
                    const double* w = weights_[l].data() + o * in_w;
                    double acc = biases_[l][o];
                    for (std::size_t i = 0; i < in_w; ++i) acc += w[i] * x[i];
                    y[o] = acc;
                }
            }
            if (l + 1 < L) {
                for (double& v : next) v = std::max(v, 0.0);
                acts.push_back(next);
                cur = std::move(next);
            } else {
                cur = std::move(next);
            }
        }
        // softmax over the two logits, shifted for stability
        for (std::size_t r = 0; r < batch_rows; ++r) {
            double* z = cur.data() + r * 2;
            const double m = std::max(z[0], z[1]);
            const double e0 = std::exp(z[0] - m), e1 = std::exp(z[1] - m);
            const double s = e0 + e1;
            z[0] = e0 / s;
            z[1] = e1 / s;
        }
        return cur;
    }

    std::vector<LayerSpec> layers_;
    std::vector<std::vector<double>> weights_;
    std::vector<std::vector<double>> biases_;
};

// Bias-corrected Adam.
struct AdamState {
    double learning_rate;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step_count = 0;

    AdamState(double lr, std::size_t param_count)
        : learning_rate(lr), first_moment(param_count, 0.0), second_moment(param_count, 0.0) {
        if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    }

    void apply(ParameterVector& params, const ParameterVector& grad) {
        if (params.size() != grad.size() || params.size() != first_moment.size()) {
            throw std::invalid_argument("adam: length mismatch");
        }
        ++step_count;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        for (std::size_t i = 0; i < params.size(); ++i) {
            first_moment[i] = beta1 * first_moment[i] + (1.0 - beta1) * grad[i];
            second_moment[i] = beta2 * second_moment[i] + (1.0 - beta2) * grad[i] * grad[i];
            const double m_hat = first_moment[i] / bc1;
            const double v_hat = second_moment[i] / bc2;
            params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + epsilon);
        }
    }
};

// Seeded mini-batch local training; shuffles each epoch, keeps the final
// partial batch. Mutates model and optimizer in place.
inline void train_local(MlpModel& model, const TabularDataset& data, std::size_t epochs,
                        std::size_t batch_size, AdamState& optimizer, std::uint64_t rng_seed) {
    if (epochs == 0) throw std::invalid_argument("train_local: epochs must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("train_local: batch_size must be >= 1");
    if (data.rows() == 0) throw std::invalid_argument("train_local: empty dataset");

    Rng rng(rng_seed);
    ParameterVector params = model.flatten();
    const std::size_t n = data.rows();
    std::vector<double> batch;
    std::vector<int> batch_labels;

    for (std::size_t e = 0; e < epochs; ++e) {
        auto order = rng.permutation(n);
        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t end = std::min(start + batch_size, n);
            const std::size_t bn = end - start;
            batch.clear();
            batch_labels.clear();
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t r = order[k];
                batch.insert(batch.end(), data.row(r), data.row(r) + data.n_cols);
                batch_labels.push_back(data.labels[r]);
            }
            auto bw = model.backward(batch, bn, batch_labels);
            optimizer.apply(params, bw.grad);
            model.unflatten(params);
        }
    }
}

// error = fraction of argmax misclassifications; ties go to class 0
inline std::pair<double, double> evaluate(const MlpModel& model, const TabularDataset& test) {
    if (test.rows() == 0) throw std::invalid_argument("evaluate: empty test set");
    auto probs = model.forward(test.features, test.rows());
    std::size_t wrong = 0;
    double loss = 0.0;
    for (std::size_t r = 0; r < test.rows(); ++r) {
        const int pred = probs[r * 2 + 1] > probs[r * 2 + 0] ? 1 : 0;
        if (pred != test.labels[r]) ++wrong;
        loss -= std::log(std::max(probs[r * 2 + test.labels[r]], 1e-300));
    }
    return {static_cast<double>(wrong) / static_cast<double>(test.rows()),
            loss / static_cast<double>(test.rows())};
}

} // namespace fedsim

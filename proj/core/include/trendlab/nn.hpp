#pragma once

#include <string>
#include <vector>

#include "trendlab/rng.hpp"
#include "trendlab/tensor.hpp"

namespace trendlab {

// Forward-pass mode. kTrain uses batch statistics and updates running stats;
// kTrainFrozenStats uses batch statistics without updating them (adversary step);
// kEval uses running statistics and disables dropout.
enum class Mode { kTrain, kTrainFrozenStats, kEval };

inline bool is_training(Mode m) { return m != Mode::kEval; }

struct ParamEntry {
    std::string name;
    Tensor tensor;
    bool trainable;  // running statistics are checkpointed but never optimized
};

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
Tensor init_uniform(Shape shape, int fan_in, Rng& rng);

// Batch normalization over rows (one statistic per column). gamma/beta are learned;
// running stats are buffers updated as running = momentum * running + (1-m) * batch.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor running_mean,
                 Tensor running_var, Mode mode, double momentum = 0.9, double eps = 1e-5);

// Inverted dropout: evaluation is the identity, training zeroes units with probability
// `rate` and scales survivors by 1/(1-rate).
Tensor dropout(const Tensor& x, double rate, Mode mode, Rng& rng);

// Single-layer GRU:
//   z = sigmoid(x W_z + h U_z + b_z)
//   r = sigmoid(x W_r + h U_r + b_r)
//   n = tanh(x W_n + (r . h) U_n + b_n)
//   h' = (1 - z) . n + z . h
class GRULayer {
public:
    GRULayer() = default;
    GRULayer(int input_size, int hidden_size, Rng& rng);

    // x_steps: T tensors of (batch x input); returns the T hidden states in order.
    std::vector<Tensor> forward(const std::vector<Tensor>& x_steps, Tensor h0 = {}) const;

    void collect_params(const std::string& prefix, std::vector<ParamEntry>& out) const;

    int input_size() const { return input_size_; }
    int hidden_size() const { return hidden_size_; }

    Tensor W_z, W_r, W_n;  // input -> hidden
    Tensor U_z, U_r, U_n;  // hidden -> hidden
    Tensor b_z, b_r, b_n;

private:
    int input_size_ = 0;
    int hidden_size_ = 0;
};

// Two stacked affine layers with batch normalization after the first and tanh in
// between: affine -> batchnorm -> tanh -> affine.
class MLPHead {
public:
    MLPHead() = default;
    MLPHead(int in, int hidden, int out, Rng& rng, double bn_momentum = 0.9, double bn_eps = 1e-5);

    Tensor forward(const Tensor& x, Mode mode) const;

    void collect_params(const std::string& prefix, std::vector<ParamEntry>& out) const;

    int in_size() const { return in_; }
    int out_size() const { return out_; }

    Tensor W1, b1, W2, b2;
    Tensor bn_gamma, bn_beta, bn_rmean, bn_rvar;
    double bn_momentum = 0.9, bn_eps = 1e-5;

private:
    int in_ = 0, hidden_ = 0, out_ = 0;
};

struct Dropout {
    double rate = 0.5;
    Tensor apply(const Tensor& x, Mode mode, Rng& rng) const { return dropout(x, rate, mode, rng); }
};

}  // namespace trendlab

#include "trendlab/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace trendlab {

Tensor init_uniform(Shape shape, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t = Tensor::zeros(shape, /*requires_grad=*/true);
    for (double& v : t.data()) v = rng.uniform(-bound, bound);
    return t;
}

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor running_mean,
                 Tensor running_var, Mode mode, double momentum, double eps) {
    const int m = x.rows(), n = x.cols();
    if (gamma.size() != n || beta.size() != n || running_mean.size() != n || running_var.size() != n) {
        throw ShapeError("batchnorm: parameter width does not match " + shape_str(x.shape()));
    }

    std::vector<double> mu(n), var(n);
    if (is_training(mode)) {
        for (int c = 0; c < n; ++c) {
            double s = 0.0;
            for (int r = 0; r < m; ++r) s += x.at(static_cast<std::int64_t>(r) * n + c);
            mu[c] = s / m;
        }
        for (int c = 0; c < n; ++c) {
            double s = 0.0;
            for (int r = 0; r < m; ++r) {
                const double d = x.at(static_cast<std::int64_t>(r) * n + c) - mu[c];
                s += d * d;
            }
            var[c] = s / m;  // biased, standard for the normalization path
        }
        if (mode == Mode::kTrain) {
            for (int c = 0; c < n; ++c) {
                running_mean.data()[c] = momentum * running_mean.data()[c] + (1.0 - momentum) * mu[c];
                running_var.data()[c] = momentum * running_var.data()[c] + (1.0 - momentum) * var[c];
            }
        }
    } else {
        mu.assign(running_mean.data().begin(), running_mean.data().end());
        var.assign(running_var.data().begin(), running_var.data().end());
    }

    std::vector<double> inv_sd(n);
    for (int c = 0; c < n; ++c) inv_sd[c] = 1.0 / std::sqrt(var[c] + eps);

    Tensor xhat = Tensor::zeros(x.shape());
    Tensor out = Tensor::zeros(x.shape());
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < n; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * n + c;
            xhat.data()[i] = (x.data()[i] - mu[c]) * inv_sd[c];
            out.data()[i] = gamma.data()[c] * xhat.data()[i] + beta.data()[c];
        }
    }

    auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), hi = xhat.impl(), oi = out.impl();
    const bool batch_stats = is_training(mode);
    if (Graph* g = Graph::active()) {
        if (xi->requires_grad || gi->requires_grad || bi->requires_grad) {
            oi->requires_grad = true;
            g->record(
                [xi, gi, bi, hi, oi, inv_sd, m, n, batch_stats] {
                    const bool gx = !xi->grad.empty();
                    for (int c = 0; c < n; ++c) {
                        double sum_gy = 0.0, sum_gy_xhat = 0.0;
                        for (int r = 0; r < m; ++r) {
                            const std::size_t i = static_cast<std::size_t>(r) * n + c;
                            sum_gy += oi->grad[i];
                            sum_gy_xhat += oi->grad[i] * hi->value[i];
                        }
                        if (!gi->grad.empty()) gi->grad[c] += sum_gy_xhat;
                        if (!bi->grad.empty()) bi->grad[c] += sum_gy;
                        if (!gx) continue;
                        const double k = gi->value[c] * inv_sd[c];
                        if (batch_stats) {
                            // dx = k * (dy - mean(dy) - xhat * mean(dy*xhat))
                            const double mg = sum_gy / m, mgx = sum_gy_xhat / m;
                            for (int r = 0; r < m; ++r) {
                                const std::size_t i = static_cast<std::size_t>(r) * n + c;
                                xi->grad[i] += k * (oi->grad[i] - mg - hi->value[i] * mgx);
                            }
                        } else {
                            for (int r = 0; r < m; ++r) {
                                const std::size_t i = static_cast<std::size_t>(r) * n + c;
                                xi->grad[i] += k * oi->grad[i];
                            }
                        }
                    }
                },
                {xi, gi, bi, oi});
        }
    }
    return out;
}

Tensor dropout(const Tensor& x, double rate, Mode mode, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw std::invalid_argument("dropout: rate " + std::to_string(rate) + " outside [0, 1)");
    }
    if (mode == Mode::kEval || rate == 0.0) return x;

    const std::size_t n = x.data().size();
    const double keep = 1.0 - rate;
    const double inv_keep = 1.0 / keep;
    std::vector<double> mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = rng.uniform() < rate ? 0.0 : inv_keep;

    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * mask[i];

    auto xi = x.impl(), oi = out.impl();
    if (Graph* g = Graph::active(); g && xi->requires_grad) {
        oi->requires_grad = true;
        g->record(
            [xi, oi, mask = std::move(mask), n] {
                if (xi->grad.empty()) return;
                for (std::size_t i = 0; i < n; ++i) xi->grad[i] += oi->grad[i] * mask[i];
            },
            {xi, oi});
    }
    return out;
}

GRULayer::GRULayer(int input_size, int hidden_size, Rng& rng)
    : input_size_(input_size), hidden_size_(hidden_size) {
    W_z = init_uniform({input_size, hidden_size}, input_size, rng);
    W_r = init_uniform({input_size, hidden_size}, input_size, rng);
    W_n = init_uniform({input_size, hidden_size}, input_size, rng);
    U_z = init_uniform({hidden_size, hidden_size}, hidden_size, rng);
    U_r = init_uniform({hidden_size, hidden_size}, hidden_size, rng);
    U_n = init_uniform({hidden_size, hidden_size}, hidden_size, rng);
    b_z = init_uniform({hidden_size}, hidden_size, rng);
    b_r = init_uniform({hidden_size}, hidden_size, rng);
    b_n = init_uniform({hidden_size}, hidden_size, rng);
}

std::vector<Tensor> GRULayer::forward(const std::vector<Tensor>& x_steps, Tensor h0) const {
    if (x_steps.empty()) throw ShapeError("gru: empty input sequence");
    const int batch = x_steps.front().rows();
    for (const Tensor& x : x_steps) {
        if (x.cols() != input_size_ || x.rows() != batch) {
            throw ShapeError("gru: step input " + shape_str(x.shape()) + " does not match input size " +
                             std::to_string(input_size_));
        }
    }
    Tensor h = h0.defined() ? h0 : Tensor::zeros({batch, hidden_size_});
    if (h.rows() != batch || h.cols() != hidden_size_) {
        throw ShapeError("gru: h0 " + shape_str(h.shape()) + " does not match batch/hidden");
    }

    std::vector<Tensor> states;
    states.reserve(x_steps.size());
    for (const Tensor& x : x_steps) {
        Tensor z = sigmoid(add_rowvec(add(matmul(x, W_z), matmul(h, U_z)), b_z));
        Tensor r = sigmoid(add_rowvec(add(matmul(x, W_r), matmul(h, U_r)), b_r));
        Tensor n = tanh(add_rowvec(add(matmul(x, W_n), matmul(mul(r, h), U_n)), b_n));
        h = add(mul(affine(z, -1.0, 1.0), n), mul(z, h));
        states.push_back(h);
    }
    return states;
}

void GRULayer::collect_params(const std::string& prefix, std::vector<ParamEntry>& out) const {
    out.push_back({prefix + ".W_z", W_z, true});
    out.push_back({prefix + ".W_r", W_r, true});
    out.push_back({prefix + ".W_n", W_n, true});
    out.push_back({prefix + ".U_z", U_z, true});
    out.push_back({prefix + ".U_r", U_r, true});
    out.push_back({prefix + ".U_n", U_n, true});
    out.push_back({prefix + ".b_z", b_z, true});
    out.push_back({prefix + ".b_r", b_r, true});
    out.push_back({prefix + ".b_n", b_n, true});
}

MLPHead::MLPHead(int in, int hidden, int out, Rng& rng, double momentum, double eps)
    : bn_momentum(momentum), bn_eps(eps), in_(in), hidden_(hidden), out_(out) {
    W1 = init_uniform({in, hidden}, in, rng);
    b1 = init_uniform({hidden}, in, rng);
    W2 = init_uniform({hidden, out}, hidden, rng);
    b2 = init_uniform({out}, hidden, rng);
    bn_gamma = Tensor::full({hidden}, 1.0, /*requires_grad=*/true);
    bn_beta = Tensor::zeros({hidden}, /*requires_grad=*/true);
    bn_rmean = Tensor::zeros({hidden});
    bn_rvar = Tensor::full({hidden}, 1.0);
}

Tensor MLPHead::forward(const Tensor& x, Mode mode) const {
    if (x.cols() != in_) {
        throw ShapeError("mlp: input " + shape_str(x.shape()) + " does not match in size " +
                         std::to_string(in_));
    }
    Tensor a1 = add_rowvec(matmul(x, W1), b1);
    Tensor h = batchnorm(a1, bn_gamma, bn_beta, bn_rmean, bn_rvar, mode, bn_momentum, bn_eps);
    return add_rowvec(matmul(tanh(h), W2), b2);
}

void MLPHead::collect_params(const std::string& prefix, std::vector<ParamEntry>& out) const {
    out.push_back({prefix + ".W1", W1, true});
    out.push_back({prefix + ".b1", b1, true});
    out.push_back({prefix + ".W2", W2, true});
    out.push_back({prefix + ".b2", b2, true});
    out.push_back({prefix + ".bn.gamma", bn_gamma, true});
    out.push_back({prefix + ".bn.beta", bn_beta, true});
    out.push_back({prefix + ".bn.running_mean", bn_rmean, false});
    out.push_back({prefix + ".bn.running_var", bn_rvar, false});
}

}  // namespace trendlab

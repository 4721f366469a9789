#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "trendlab/rng.hpp"

namespace trendlab {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense row-major 64-bit float storage. Gradient buffer is allocated on demand
// by the tape's backward sweep.
struct TensorImpl {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::int64_t node_id = -1;  // assigned when first touched by a recording tape
};

class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> value, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::int64_t size() const { return static_cast<std::int64_t>(impl_->value.size()); }
    int rows() const;
    int cols() const;

    double item() const;  // scalar tensors only
    double at(std::int64_t i) const { return impl_->value[static_cast<std::size_t>(i)]; }

    std::vector<double>& data() { return impl_->value; }
    const std::vector<double>& data() const { return impl_->value; }
    const std::vector<double>& grad() const { return impl_->grad; }
    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

    std::shared_ptr<TensorImpl> impl() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// Tape of recorded operations. backward() zeroes the gradients of every tensor the
// tape touched, seeds d(loss)/d(loss) = 1 and replays the recorded closures in exact
// reverse recording order, accumulating gradients additively. The tape is cleared
// after the sweep; one tape serves one forward pass.
class Graph {
public:
    Graph();
    ~Graph();
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    void backward(const Tensor& loss);
    std::size_t size() const { return ops_.size(); }

    // Recording goes through the thread-local active tape; ops are value-only when
    // no tape is active (evaluation path) or when no input carries requires_grad.
    static Graph* active();
    void record(std::function<void()> backward_fn,
                std::vector<std::shared_ptr<TensorImpl>> touched);

private:
    struct Op {
        std::function<void()> backward_fn;
    };
    std::vector<Op> ops_;
    std::vector<std::shared_ptr<TensorImpl>> touched_;
    Graph* parent_ = nullptr;
    std::int64_t next_node_id_ = 0;
};

// ---- recorded operations ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);            // identical shapes
Tensor add_rowvec(const Tensor& a, const Tensor& bias);  // bias [n] broadcast across rows
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);            // elementwise
Tensor affine(const Tensor& a, double scale, double shift);  // scale * a + shift
Tensor scale(const Tensor& a, double c);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softmax_rows(const Tensor& logits);
Tensor sum(const Tensor& a);   // scalar
Tensor mean(const Tensor& a);  // scalar
Tensor concat_cols(const Tensor& a, const Tensor& b);

// mean of squared differences over all entries
Tensor mse(const Tensor& pred, const Tensor& target);
// mean over rows of -log softmax(logits)[label]; softmax fused for stability
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);
// sum_i w[i] * row_mse_i / nrows; target and weights are constants (teacher side)
Tensor weighted_row_mse(const Tensor& pred, const Tensor& target, const std::vector<double>& w);

// ---- optimizer --------------------------------------------------------------------

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig cfg = {});
    void step();  // consumes param gradients left by the last backward()
    const std::vector<Tensor>& params() const { return params_; }

private:
    struct State {
        std::vector<double> m, v;
    };
    std::vector<Tensor> params_;
    std::vector<State> state_;
    AdamConfig cfg_;
    long t_ = 0;
};

// ---- checkpoint container ---------------------------------------------------------
//
// Flat binary container mapping parameter-path strings to shape + raw 64-bit float
// data (little-endian). Round-trips are bit-exact. Layout:
//   magic "TLCKPT01" | u64 entry count | per entry:
//     u32 name length | name bytes | u32 ndim | i64 dims[ndim] | f64 data[product(dims)]

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_checkpoint(const std::string& path, const NamedTensors& entries);
NamedTensors load_checkpoint(const std::string& path);

}  // namespace trendlab

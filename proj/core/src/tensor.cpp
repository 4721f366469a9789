#include "trendlab/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace trendlab {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_mat(const TensorImpl& t, int r, int c) { return ConstMap(t.value.data(), r, c); }
MutMap as_mut(std::vector<double>& v, int r, int c) { return MutMap(v.data(), r, c); }

std::int64_t numel(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

thread_local Graph* g_active_graph = nullptr;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

// Rows/cols of a tensor interpreted as a 2-d matrix (1-d tensors are a single row).
std::pair<int, int> mat_dims(const Tensor& t, const char* op) {
    const Shape& s = t.shape();
    if (s.size() == 1) return {1, s[0]};
    if (s.size() == 2) return {s[0], s[1]};
    throw ShapeError(std::string(op) + ": expected a 1-d or 2-d tensor, got " + shape_str(s));
}

}  // namespace

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> value, bool requires_grad) {
    if (numel(shape) != static_cast<std::int64_t>(value.size())) {
        throw ShapeError("tensor: " + shape_str(shape) + " does not hold " +
                         std::to_string(value.size()) + " values");
    }
    impl_ = std::make_shared<TensorImpl>();
    impl_->shape = std::move(shape);
    impl_->value = std::move(value);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> v(static_cast<std::size_t>(numel(shape)), 0.0);
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(Shape shape, double x, bool requires_grad) {
    std::vector<double> v(static_cast<std::size_t>(numel(shape)), x);
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

int Tensor::rows() const { return mat_dims(*this, "rows").first; }
int Tensor::cols() const { return mat_dims(*this, "cols").second; }

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item: tensor " + shape_str(shape()) + " is not scalar");
    return impl_->value[0];
}

// ---- Graph -------------------------------------------------------------------------

Graph::Graph() {
    parent_ = g_active_graph;
    g_active_graph = this;
}

Graph::~Graph() { g_active_graph = parent_; }

Graph* Graph::active() { return g_active_graph; }

void Graph::record(std::function<void()> backward_fn,
                   std::vector<std::shared_ptr<TensorImpl>> touched) {
    for (const auto& t : touched) {
        if (t->node_id < 0) t->node_id = next_node_id_++;
        touched_.push_back(t);
    }
    ops_.push_back(Op{std::move(backward_fn)});
}

void Graph::backward(const Tensor& loss) {
    if (loss.size() != 1) {
        throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    }
    // Zero (or allocate) gradients for the differentiable tensors this tape touched.
    std::unordered_set<TensorImpl*> seen;
    seen.reserve(touched_.size() * 2);
    for (const auto& t : touched_) {
        if (t->requires_grad && seen.insert(t.get()).second) {
            t->grad.assign(t->value.size(), 0.0);
        }
    }
    loss.impl()->grad.assign(1, 1.0);

    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
        it->backward_fn();
    }
    ops_.clear();
    touched_.clear();
}

// ---- op helpers --------------------------------------------------------------------

namespace {

// Constants never get a gradient buffer; accumulation into them is skipped.
bool has_grad(const std::shared_ptr<TensorImpl>& t) { return !t->grad.empty(); }

// Records the backward closure when a tape is active and at least one input is on the
// differentiation path; the output then joins the path.
void record_op(std::function<void()> fn,
               std::initializer_list<std::shared_ptr<TensorImpl>> tensors) {
    Graph* g = Graph::active();
    if (!g) return;
    std::vector<std::shared_ptr<TensorImpl>> v(tensors);
    bool any = false;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) any = any || v[i]->requires_grad;
    if (!any) return;
    v.back()->requires_grad = true;
    g->record(std::move(fn), std::move(v));
}

}  // namespace

// ---- operations --------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    auto [m, k] = mat_dims(a, "matmul");
    auto [k2, n] = mat_dims(b, "matmul");
    if (k != k2) {
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " * " +
                         shape_str(b.shape()));
    }
    Tensor out = Tensor::zeros({m, n});
    as_mut(out.data(), m, n).noalias() = as_mat(*a.impl(), m, k) * as_mat(*b.impl(), k, n);

    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    record_op(
        [ai, bi, oi, m = m, k = k, n = n] {
            ConstMap go(oi->grad.data(), m, n);
            if (has_grad(ai)) {
                MutMap(ai->grad.data(), m, k).noalias() += go * as_mat(*bi, k, n).transpose();
            }
            if (has_grad(bi)) {
                MutMap(bi->grad.data(), k, n).noalias() += as_mat(*ai, m, k).transpose() * go;
            }
        },
        {ai, bi, oi});
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = Tensor::zeros(a.shape());
    const std::size_t n = a.data().size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];

    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    record_op(
        [ai, bi, oi, n] {
            if (has_grad(ai))
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += oi->grad[i];
            if (has_grad(bi))
                for (std::size_t i = 0; i < n; ++i) bi->grad[i] += oi->grad[i];
        },
        {ai, bi, oi});
    return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& bias) {
    auto [m, n] = mat_dims(a, "add_rowvec");
    if (bias.size() != n) {
        throw ShapeError("add_rowvec: bias " + shape_str(bias.shape()) + " does not match row width of " +
                         shape_str(a.shape()));
    }
    Tensor out = Tensor::zeros(a.shape());
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c)
            out.data()[static_cast<std::size_t>(r) * n + c] =
                a.data()[static_cast<std::size_t>(r) * n + c] + bias.data()[c];

    auto ai = a.impl(), bi = bias.impl(), oi = out.impl();
    record_op(
        [ai, bi, oi, m = m, n = n] {
            if (has_grad(ai))
                for (std::size_t i = 0; i < static_cast<std::size_t>(m) * n; ++i)
                    ai->grad[i] += oi->grad[i];
            if (has_grad(bi))
                for (int r = 0; r < m; ++r)
                    for (int c = 0; c < n; ++c)
                        bi->grad[c] += oi->grad[static_cast<std::size_t>(r) * n + c];
        },
        {ai, bi, oi});
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = Tensor::zeros(a.shape());
    const std::size_t n = a.data().size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];

    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    record_op(
        [ai, bi, oi, n] {
            if (has_grad(ai))
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += oi->grad[i];
            if (has_grad(bi))
                for (std::size_t i = 0; i < n; ++i) bi->grad[i] -= oi->grad[i];
        },
        {ai, bi, oi});
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out = Tensor::zeros(a.shape());
    const std::size_t n = a.data().size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];

    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    record_op(
        [ai, bi, oi, n] {
            if (has_grad(ai))
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += oi->grad[i] * bi->value[i];
            if (has_grad(bi))
                for (std::size_t i = 0; i < n; ++i) bi->grad[i] += oi->grad[i] * ai->value[i];
        },
        {ai, bi, oi});
    return out;
}

Tensor affine(const Tensor& a, double s, double shift) {
    Tensor out = Tensor::zeros(a.shape());
    const std::size_t n = a.data().size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = s * a.data()[i] + shift;

    auto ai = a.impl(), oi = out.impl();
    record_op(
        [ai, oi, s, n] {
            if (has_grad(ai))
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += s * oi->grad[i];
        },
        {ai, oi});
    return out;
}

Tensor scale(const Tensor& a, double c) { return affine(a, c, 0.0); }

Tensor tanh(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape());
    const std::size_t n = a.data().size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::tanh(a.data()[i]);

    auto ai = a.impl(), oi = out.impl();
    record_op(
        [ai, oi, n] {
            if (has_grad(ai))
                for (std::size_t i = 0; i < n; ++i)
                    ai->grad[i] += oi->grad[i] * (1.0 - oi->value[i] * oi->value[i]);
        },
        {ai, oi});
    return out;
}

Tensor sigmoid(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape());
    const std::size_t n = a.data().size();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a.data()[i];
        // branch on sign so exp never overflows
        out.data()[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }

    auto ai = a.impl(), oi = out.impl();
    record_op(
        [ai, oi, n] {
            if (has_grad(ai))
                for (std::size_t i = 0; i < n; ++i)
                    ai->grad[i] += oi->grad[i] * oi->value[i] * (1.0 - oi->value[i]);
        },
        {ai, oi});
    return out;
}

Tensor softmax_rows(const Tensor& logits) {
    auto [m, n] = mat_dims(logits, "softmax_rows");
    if (n < 2) throw ShapeError("softmax_rows: needs at least 2 columns, got " + shape_str(logits.shape()));
    Tensor out = Tensor::zeros(logits.shape());
    for (int r = 0; r < m; ++r) {
        const double* row = logits.data().data() + static_cast<std::size_t>(r) * n;
        double* orow = out.data().data() + static_cast<std::size_t>(r) * n;
        double mx = row[0];
        for (int c = 1; c < n; ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (int c = 0; c < n; ++c) z += (orow[c] = std::exp(row[c] - mx));
        for (int c = 0; c < n; ++c) orow[c] /= z;
    }

    auto ai = logits.impl(), oi = out.impl();
    record_op(
        [ai, oi, m = m, n = n] {
            if (!has_grad(ai)) return;
            // dx = y * (dy - <dy, y>) per row
            for (int r = 0; r < m; ++r) {
                const double* y = oi->value.data() + static_cast<std::size_t>(r) * n;
                const double* gy = oi->grad.data() + static_cast<std::size_t>(r) * n;
                double* gx = ai->grad.data() + static_cast<std::size_t>(r) * n;
                double dot = 0.0;
                for (int c = 0; c < n; ++c) dot += gy[c] * y[c];
                for (int c = 0; c < n; ++c) gx[c] += y[c] * (gy[c] - dot);
            }
        },
        {ai, oi});
    return out;
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    Tensor out = Tensor::scalar(s);
    auto ai = a.impl(), oi = out.impl();
    record_op(
        [ai, oi] {
            if (has_grad(ai))
                for (double& g : ai->grad) g += oi->grad[0];
        },
        {ai, oi});
    return out;
}

Tensor mean(const Tensor& a) {
    const double inv = 1.0 / static_cast<double>(a.size());
    double s = 0.0;
    for (double v : a.data()) s += v;
    Tensor out = Tensor::scalar(s * inv);
    auto ai = a.impl(), oi = out.impl();
    record_op(
        [ai, oi, inv] {
            if (has_grad(ai))
                for (double& g : ai->grad) g += oi->grad[0] * inv;
        },
        {ai, oi});
    return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    auto [m, p] = mat_dims(a, "concat_cols");
    auto [m2, q] = mat_dims(b, "concat_cols");
    if (m != m2) {
        throw ShapeError("concat_cols: row counts disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    Tensor out = Tensor::zeros({m, p + q});
    for (int r = 0; r < m; ++r) {
        std::copy_n(a.data().data() + static_cast<std::size_t>(r) * p, p,
                    out.data().data() + static_cast<std::size_t>(r) * (p + q));
        std::copy_n(b.data().data() + static_cast<std::size_t>(r) * q, q,
                    out.data().data() + static_cast<std::size_t>(r) * (p + q) + p);
    }

    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    record_op(
        [ai, bi, oi, m = m, p = p, q = q] {
            for (int r = 0; r < m; ++r) {
                const double* go = oi->grad.data() + static_cast<std::size_t>(r) * (p + q);
                if (has_grad(ai)) {
                    double* ga = ai->grad.data() + static_cast<std::size_t>(r) * p;
                    for (int c = 0; c < p; ++c) ga[c] += go[c];
                }
                if (has_grad(bi)) {
                    double* gb = bi->grad.data() + static_cast<std::size_t>(r) * q;
                    for (int c = 0; c < q; ++c) gb[c] += go[p + c];
                }
            }
        },
        {ai, bi, oi});
    return out;
}

Tensor mse(const Tensor& pred, const Tensor& target) {
    if (pred.size() != target.size()) {
        throw ShapeError("mse: lengths disagree, " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
    }
    const std::size_t n = pred.data().size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred.data()[i] - target.data()[i];
        s += d * d;
    }
    Tensor out = Tensor::scalar(s / static_cast<double>(n));

    auto pi = pred.impl(), ti = target.impl(), oi = out.impl();
    record_op(
        [pi, ti, oi, n] {
            const double c = 2.0 / static_cast<double>(n) * oi->grad[0];
            if (has_grad(pi))
                for (std::size_t i = 0; i < n; ++i)
                    pi->grad[i] += c * (pi->value[i] - ti->value[i]);
            if (has_grad(ti))
                for (std::size_t i = 0; i < n; ++i)
                    ti->grad[i] -= c * (pi->value[i] - ti->value[i]);
        },
        {pi, ti, oi});
    return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    auto [m, n] = mat_dims(logits, "cross_entropy");
    if (static_cast<int>(labels.size()) != m) {
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(m) + " rows");
    }
    for (int lab : labels) {
        if (lab < 0 || lab >= n)
            throw std::out_of_range("cross_entropy: label " + std::to_string(lab) + " outside [0, " +
                                    std::to_string(n) + ")");
    }
    // softmax probabilities cached for the backward rule
    std::vector<double> probs(static_cast<std::size_t>(m) * n);
    double loss = 0.0;
    for (int r = 0; r < m; ++r) {
        const double* row = logits.data().data() + static_cast<std::size_t>(r) * n;
        double* prow = probs.data() + static_cast<std::size_t>(r) * n;
        double mx = row[0];
        for (int c = 1; c < n; ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (int c = 0; c < n; ++c) z += (prow[c] = std::exp(row[c] - mx));
        for (int c = 0; c < n; ++c) prow[c] /= z;
        loss -= std::log(std::max(prow[labels[r]], 1e-300));
    }
    Tensor out = Tensor::scalar(loss / static_cast<double>(m));

    auto li = logits.impl(), oi = out.impl();
    record_op(
        [li, oi, labels, probs = std::move(probs), m = m, n = n] {
            if (!has_grad(li)) return;
            const double c0 = oi->grad[0] / static_cast<double>(m);
            for (int r = 0; r < m; ++r) {
                const double* prow = probs.data() + static_cast<std::size_t>(r) * n;
                double* g = li->grad.data() + static_cast<std::size_t>(r) * n;
                for (int c = 0; c < n; ++c)
                    g[c] += c0 * (prow[c] - (c == labels[r] ? 1.0 : 0.0));
            }
        },
        {li, oi});
    return out;
}

Tensor weighted_row_mse(const Tensor& pred, const Tensor& target, const std::vector<double>& w) {
    auto [m, n] = mat_dims(pred, "weighted_row_mse");
    check_same_shape(pred, target, "weighted_row_mse");
    if (static_cast<int>(w.size()) != m) {
        throw ShapeError("weighted_row_mse: " + std::to_string(w.size()) + " weights for " +
                         std::to_string(m) + " rows");
    }
    double s = 0.0;
    for (int r = 0; r < m; ++r) {
        double row = 0.0;
        for (int c = 0; c < n; ++c) {
            const double d = pred.at(static_cast<std::int64_t>(r) * n + c) -
                             target.at(static_cast<std::int64_t>(r) * n + c);
            row += d * d;
        }
        s += w[static_cast<std::size_t>(r)] * row / static_cast<double>(n);
    }
    Tensor out = Tensor::scalar(s / static_cast<double>(m));

    auto pi = pred.impl(), ti = target.impl(), oi = out.impl();
    record_op(
        [pi, ti, oi, w, m = m, n = n] {
            if (!has_grad(pi)) return;
            const double c0 = oi->grad[0] / static_cast<double>(m);
            for (int r = 0; r < m; ++r) {
                const double cw = c0 * w[static_cast<std::size_t>(r)] * 2.0 / static_cast<double>(n);
                for (int c = 0; c < n; ++c) {
                    const std::size_t i = static_cast<std::size_t>(r) * n + c;
                    pi->grad[i] += cw * (pi->value[i] - ti->value[i]);
                }
            }
        },
        {pi, ti, oi});
    return out;
}

// ---- Adam --------------------------------------------------------------------------

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    state_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        state_[i].m.assign(params_[i].data().size(), 0.0);
        state_[i].v.assign(params_[i].data().size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
        auto& impl = *params_[p].impl();
        if (impl.grad.size() != impl.value.size()) {
            throw ShapeError("adam: parameter " + std::to_string(p) + " has no gradient");
        }
        auto& st = state_[p];
        for (std::size_t i = 0; i < impl.value.size(); ++i) {
            const double g = impl.grad[i];
            st.m[i] = cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * g;
            st.v[i] = cfg_.beta2 * st.v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = st.m[i] / bc1;
            const double vhat = st.v[i] / bc2;
            impl.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

}  // namespace trendlab

#include "flexssl/tensor.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace flexssl {

namespace {
std::atomic<std::uint64_t> next_node_id{1};

using detail::Node;

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(fmt::format("{}: shape mismatch {} vs {}", op, shape_str(a.shape()),
                                     shape_str(b.shape())));
    }
}

void require_2d(const char* op, const Tensor& x) {
    if (x.shape().size() != 2) {
        throw ShapeError(fmt::format("{}: expected a 2-D tensor, got {}", op, shape_str(x.shape())));
    }
}

void require_finite_values(const char* op, std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) throw ShapeError(fmt::format("{}: non-finite input", op));
    }
}

// Elementwise unary op where the local derivative depends on input and output.
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv);
}  // namespace

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->id = next_node_id.fetch_add(1, std::memory_order_relaxed);
    for (auto& in : inputs) {
        node->requires_grad = node->requires_grad || in.node_->requires_grad;
        node->parents.push_back(in.node_);
    }
    if (node->requires_grad) node->backward = std::move(backward);
    return Tensor(std::move(node));
}

namespace {
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
    auto in = x.values();
    std::vector<double> out(in.size());
    std::transform(in.begin(), in.end(), out.begin(), fwd);
    return make_result(x.shape(), std::move(out), {x}, [deriv](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < self.value.size(); ++i) {
            p.grad[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
        }
    });
}
}  // namespace

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    return fmt::format("[{}]", fmt::join(shape, ", "));
}

Matrix Matrix::select_rows(std::span<const std::size_t> idx) const {
    Matrix out(idx.size(), cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        auto src = row(idx[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

// ---- Tensor ----------------------------------------------------------------

namespace {
std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_size(shape) != values.size()) {
        throw ShapeError(fmt::format("tensor: shape {} holds {} values, got {}", shape_str(shape),
                                     shape_size(shape), values.size()));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    node->id = next_node_id.fetch_add(1, std::memory_order_relaxed);
    return node;
}
}  // namespace

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
    return Tensor(make_leaf(std::move(shape), std::move(values), true));
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
    return Tensor(make_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::constant(const Matrix& m) { return constant({m.rows, m.cols}, m.data); }

Tensor Tensor::scalar(double v) { return constant({}, {v}); }

Tensor Tensor::zeros(Shape shape) {
    auto n = shape_size(shape);
    return constant(std::move(shape), std::vector<double>(n, 0.0));
}

std::size_t Tensor::rows() const {
    const auto& s = shape();
    return s.empty() ? 1 : s[0];
}

std::size_t Tensor::cols() const {
    const auto& s = shape();
    if (s.size() < 2) return 1;
    return shape_size(Shape(s.begin() + 1, s.end()));
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError(fmt::format("item: tensor {} is not scalar", shape_str(shape())));
    return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

std::span<const double> Tensor::grad() const {
    if (!node_->has_grad) throw std::logic_error("grad: tensor has no gradient");
    return node_->grad;
}

void Tensor::zero_grad() {
    node_->grad.assign(node_->value.size(), 0.0);
    node_->has_grad = true;
}

void Tensor::clear_grad() {
    node_->grad.clear();
    node_->has_grad = false;
}

Tensor Tensor::detach() const { return constant(node_->shape, node_->value); }

Matrix Tensor::to_matrix() const {
    Matrix m;
    m.rows = rows();
    m.cols = cols();
    m.data = node_->value;
    return m;
}

void Tensor::backward() const {
    if (size() != 1) {
        throw ShapeError(fmt::format("backward: root must be scalar, got {}", shape_str(shape())));
    }
    if (!node_->requires_grad) return;

    // Iterative post-order DFS over nodes that require grad.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    for (Node* n : order) {
        if (!n->parents.empty() || !n->has_grad) {
            n->grad.assign(n->value.size(), 0.0);
            n->has_grad = true;
        }
    }
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward) (*it)->backward(**it);
    }
}

// ---- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d("matmul", a);
    require_2d("matmul", b);
    if (a.shape()[1] != b.shape()[0]) {
        throw ShapeError(fmt::format("matmul: shape mismatch {} vs {}", shape_str(a.shape()),
                                     shape_str(b.shape())));
    }
    const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
    auto av = a.values();
    auto bv = b.values();
    std::vector<double> out(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            for (std::size_t j = 0; j < m; ++j) out[i * m + j] += aip * bv[p * m + j];
        }
    }
    return make_result({n, m}, std::move(out), {a, b}, [n, k, m](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < m; ++j) acc += self.grad[i * m + j] * pb.value[p * m + j];
                    pa.grad[i * k + p] += acc;
                }
        }
        if (pb.requires_grad) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = pa.value[i * k + p];
                    for (std::size_t j = 0; j < m; ++j) pb.grad[p * m + j] += aip * self.grad[i * m + j];
                }
        }
    });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_2d("affine", x);
    require_2d("affine", w);
    if (x.shape()[1] != w.shape()[0]) {
        throw ShapeError(fmt::format("affine: shape mismatch {} vs {}", shape_str(x.shape()),
                                     shape_str(w.shape())));
    }
    const std::size_t m = w.shape()[1];
    if (b.size() != m) {
        throw ShapeError(fmt::format("affine: bias shape mismatch {} vs {}", shape_str(b.shape()),
                                     shape_str(w.shape())));
    }
    Tensor xw = matmul(x, w);
    const std::size_t n = xw.shape()[0];
    std::vector<double> out(xw.values().begin(), xw.values().end());
    auto bv = b.values();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bv[j];
    return make_result({n, m}, std::move(out), {xw, b}, [n, m](Node& self) {
        Node& pxw = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pxw.requires_grad)
            for (std::size_t i = 0; i < n * m; ++i) pxw.grad[i] += self.grad[i];
        if (pb.requires_grad)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) pb.grad[j] += self.grad[i * m + j];
    });
}

Tensor relu(const Tensor& x) {
    return unary(
        x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x,
        [](double v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double out) { return out * (1.0 - out); });
}

Tensor tanh(const Tensor& x) {
    return unary(
        x, [](double v) { return std::tanh(v); }, [](double, double out) { return 1.0 - out * out; });
}

Tensor exp(const Tensor& x) {
    return unary(
        x, [](double v) { return std::exp(v); }, [](double, double out) { return out; });
}

Tensor log(const Tensor& x) {
    for (double v : x.values()) {
        if (!(v > 0.0)) throw ShapeError(fmt::format("log: non-positive input {}", v));
    }
    return unary(
        x, [](double v) { return std::log(v); }, [](double in, double) { return 1.0 / in; });
}

Tensor square(const Tensor& x) {
    return unary(
        x, [](double v) { return v * v; }, [](double in, double) { return 2.0 * in; });
}

Tensor clamp_min(const Tensor& x, double lo) {
    return unary(
        x, [lo](double v) { return v > lo ? v : lo; },
        [lo](double in, double) { return in > lo ? 1.0 : 0.0; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    if (!(lo <= hi)) throw ShapeError(fmt::format("clamp: empty range [{}, {}]", lo, hi));
    return unary(
        x, [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
        [lo, hi](double in, double) { return in >= lo && in <= hi ? 1.0 : 0.0; });
}

Tensor scale(const Tensor& x, double c) {
    return unary(
        x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& x, double c) {
    return unary(
        x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor softmax_rows(const Tensor& x) {
    require_2d("softmax_rows", x);
    require_finite_values("softmax_rows", x.values());
    const std::size_t n = x.shape()[0], m = x.shape()[1];
    auto in = x.values();
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = in.data() + i * m;
        const double mx = *std::max_element(row, row + m);
        double z = 0.0;
        for (std::size_t j = 0; j < m; ++j) z += (out[i * m + j] = std::exp(row[j] - mx));
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] /= z;
    }
    return make_result(x.shape(), std::move(out), {x}, [n, m](Node& self) {
        Node& p = *self.parents[0];
        for (std::size_t i = 0; i < n; ++i) {
            const double* s = self.value.data() + i * m;
            const double* g = self.grad.data() + i * m;
            double dot = 0.0;
            for (std::size_t j = 0; j < m; ++j) dot += s[j] * g[j];
            for (std::size_t j = 0; j < m; ++j) p.grad[i * m + j] += s[j] * (g[j] - dot);
        }
    });
}

namespace {
template <typename Fwd, typename Da, typename Db>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Da da, Db db) {
    require_same_shape(name, a, b);
    auto av = a.values();
    auto bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
    return make_result(a.shape(), std::move(out), {a, b}, [da, db](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        for (std::size_t i = 0; i < self.value.size(); ++i) {
            if (pa.requires_grad) pa.grad[i] += self.grad[i] * da(pa.value[i], pb.value[i]);
            if (pb.requires_grad) pb.grad[i] += self.grad[i] * db(pa.value[i], pb.value[i]);
        }
    });
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(
        "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(
        "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(
        "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    require_2d("concat_cols", a);
    require_2d("concat_cols", b);
    if (a.shape()[0] != b.shape()[0]) {
        throw ShapeError(fmt::format("concat_cols: row count mismatch {} vs {}", shape_str(a.shape()),
                                     shape_str(b.shape())));
    }
    const std::size_t n = a.shape()[0], ca = a.shape()[1], cb = b.shape()[1], c = ca + cb;
    auto av = a.values();
    auto bv = b.values();
    std::vector<double> out(n * c);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(av.data() + i * ca, ca, out.data() + i * c);
        std::copy_n(bv.data() + i * cb, cb, out.data() + i * c + ca);
    }
    return make_result({n, c}, std::move(out), {a, b}, [n, ca, cb, c](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        for (std::size_t i = 0; i < n; ++i) {
            if (pa.requires_grad)
                for (std::size_t j = 0; j < ca; ++j) pa.grad[i * ca + j] += self.grad[i * c + j];
            if (pb.requires_grad)
                for (std::size_t j = 0; j < cb; ++j) pb.grad[i * cb + j] += self.grad[i * c + ca + j];
        }
    });
}

Tensor row_sum(const Tensor& x) {
    require_2d("row_sum", x);
    const std::size_t n = x.shape()[0], m = x.shape()[1];
    auto in = x.values();
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[i] += in[i * m + j];
    return make_result({n, 1}, std::move(out), {x}, [n, m](Node& self) {
        Node& p = *self.parents[0];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) p.grad[i * m + j] += self.grad[i];
    });
}

Tensor row_mean(const Tensor& x) {
    require_2d("row_mean", x);
    const std::size_t m = x.shape()[1];
    if (m == 0) throw ShapeError("row_mean: zero columns");
    return scale(row_sum(x), 1.0 / static_cast<double>(m));
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.values()) s += v;
    return make_result({}, {s}, {x}, [](Node& self) {
        Node& p = *self.parents[0];
        for (double& g : p.grad) g += self.grad[0];
    });
}

Tensor mean(const Tensor& x) {
    const std::size_t n = x.size();
    if (n == 0) return make_result({}, {0.0}, {x}, [](Node&) {});
    double s = 0.0;
    for (double v : x.values()) s += v;
    const double inv = 1.0 / static_cast<double>(n);
    return make_result({}, {s * inv}, {x}, [inv](Node& self) {
        Node& p = *self.parents[0];
        for (double& g : p.grad) g += self.grad[0] * inv;
    });
}

}  // namespace flexssl

#pragma once

// Dense reverse-mode automatic differentiation over 64-bit floats.
//
// The graph is built on the fly by the op functions below (define-by-run).
// A Tensor is a cheap handle onto a shared node; parameters are leaf nodes
// that outlive each per-batch graph, and intermediate nodes are freed once the
// last handle referencing the root goes away.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flexssl {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Thrown for shape mismatches and domain violations inside tensor ops.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Row-major 2-D buffer for data that never enters a graph (datasets, labels).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    /// Copies the listed rows, in order.
    Matrix select_rows(std::span<const std::size_t> idx) const;

    bool operator==(const Matrix&) const = default;
};

namespace detail {
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::uint64_t id = 0;
    std::vector<std::shared_ptr<Node>> parents;
    // Adds this node's gradient contribution into the parents' grads.
    std::function<void(Node&)> backward;
};
}  // namespace detail

class Tensor {
public:
    Tensor() = default;

    /// Learnable leaf; participates in backward.
    static Tensor parameter(Shape shape, std::vector<double> values);
    /// Constant leaf; gradients are never propagated into it.
    static Tensor constant(Shape shape, std::vector<double> values);
    static Tensor constant(const Matrix& m);
    static Tensor scalar(double v);
    static Tensor zeros(Shape shape);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->value.size(); }
    std::size_t rows() const;
    std::size_t cols() const;
    std::uint64_t id() const { return node_->id; }
    bool requires_grad() const { return node_->requires_grad; }
    bool is_leaf() const { return node_->parents.empty(); }

    std::span<const double> values() const { return node_->value; }
    /// Mutable access for optimizers and loaders. Shape stays fixed.
    std::span<double> mutable_values() { return node_->value; }
    double item() const;
    double at(std::size_t r, std::size_t c) const;

    bool has_grad() const { return node_->has_grad; }
    std::span<const double> grad() const;
    void zero_grad();
    void clear_grad();

    /// Returns a constant copy cut off from the graph.
    Tensor detach() const;
    Matrix to_matrix() const;

    /// Populates grads of every reachable leaf that requires grad.
    /// Leaf grads accumulate across calls until cleared.
    void backward() const;

private:
    friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>,
                              std::function<void(detail::Node&)>);
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
    std::shared_ptr<detail::Node> node_;
};

// ---- ops -------------------------------------------------------------------
// All binary elementwise ops require identical shapes.

/// x (n×d) · w (d×m) + b (m) → n×m
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
/// Rejects non-positive inputs. Callers that need a floor use clamp_min first.
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
/// max(x, lo); gradient is zero where the floor is active.
Tensor clamp_min(const Tensor& x, double lo);
/// min(max(x, lo), hi); gradient is zero outside [lo, hi].
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor softmax_rows(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
inline Tensor hadamard(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);

Tensor concat_cols(const Tensor& a, const Tensor& b);
/// n×m → n×1
Tensor row_sum(const Tensor& x);
Tensor row_mean(const Tensor& x);
Tensor sum(const Tensor& x);
/// Mean over all elements; the mean of an empty tensor is 0.
Tensor mean(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

}  // namespace flexssl

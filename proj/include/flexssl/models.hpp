#pragma once

#include "flexssl/optim.hpp"
#include "flexssl/rng.hpp"
#include "flexssl/tensor.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace flexssl {

/// Classification with k classes, or regression with out_dim outputs.
struct TaskKind {
    enum class Kind { classification, regression };
    Kind kind = Kind::classification;
    std::size_t dim = 2;

    static TaskKind classification(std::size_t k);
    static TaskKind regression(std::size_t out_dim);

    bool is_classification() const { return kind == Kind::classification; }
    std::size_t out_dim() const { return dim; }
    /// Label columns stored in a dataset: class index for classification.
    std::size_t label_cols() const { return is_classification() ? 1 : dim; }

    std::string name() const { return is_classification() ? "classification" : "regression"; }
    bool operator==(const TaskKind&) const = default;
};

enum class Activation { relu, tanh };

/// Stack of affine layers whose parameters live in an external ParamStore.
class Mlp {
public:
    Mlp() = default;
    /// Registers layers dims[0]→dims[1]→... in `store` as "<prefix>.w<i>" /
    /// "<prefix>.b<i>" with Kaiming-normal weights and zero biases.
    Mlp(ParamStore& store, const std::string& prefix, std::vector<std::size_t> dims,
        Activation act, bool activate_last, Rng& rng);

    Tensor forward(const ParamStore& store, Tensor x) const;

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t in_dim() const { return dims_.front(); }
    std::size_t out_dim() const { return dims_.back(); }

private:
    std::vector<std::size_t> dims_;
    std::vector<std::size_t> slots_;  // index of each layer's weight in the store; bias follows
    Activation act_ = Activation::relu;
    bool activate_last_ = false;
};

class MainModel {
public:
    MainModel() = default;

    /// Softmax rows for classification, raw outputs for regression.
    Tensor forward(const Tensor& x) const;

    const TaskKind& task() const { return task_; }
    std::size_t input_dim() const { return input_dim_; }
    const std::vector<std::size_t>& hidden_widths() const { return hidden_; }
    Activation activation() const { return act_; }

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    /// Deep copy (fresh parameter leaves, same optimizer state).
    MainModel clone() const;

    nlohmann::json to_json() const;
    static MainModel from_json(const nlohmann::json& j);

private:
    friend MainModel build_main_model(TaskKind, std::size_t, std::vector<std::size_t>, std::uint64_t,
                                      Activation);
    TaskKind task_;
    std::size_t input_dim_ = 0;
    std::vector<std::size_t> hidden_;
    Activation act_ = Activation::relu;
    Mlp net_;
    ParamStore params_;
};

MainModel build_main_model(TaskKind task, std::size_t input_dim, std::vector<std::size_t> hidden_widths,
                           std::uint64_t seed, Activation act = Activation::relu);

struct DiscriminatorShape {
    std::vector<std::size_t> x_widths{32};
    std::vector<std::size_t> y_widths{32};
};

/// Label-observability classifier d(X, Ŷ, g) → P ∈ (0,1)ⁿ.
///
/// X and Ŷ each pass through their own ReLU extractor; the two equal-width
/// embeddings are fused elementwise, g is appended as one extra column, and a
/// single affine layer with a sigmoid head produces the per-row probability.
class Discriminator {
public:
    Discriminator() = default;

    /// Inputs are detached: no gradient flows from d's loss back into f.
    /// Returns an n×1 tensor.
    Tensor forward(const Tensor& x, const Tensor& y_hat, const Tensor& g) const;

    std::size_t input_dim() const { return x_net_.in_dim(); }
    std::size_t pred_dim() const { return y_net_.in_dim(); }
    std::size_t embed_dim() const { return x_net_.out_dim(); }

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    Discriminator clone() const;

private:
    friend Discriminator build_discriminator(std::size_t, std::size_t, const DiscriminatorShape&,
                                             std::uint64_t);
    Mlp x_net_;
    Mlp y_net_;
    Mlp head_;
    ParamStore params_;
};

/// Throws std::invalid_argument if the two extractor output widths differ.
Discriminator build_discriminator(std::size_t input_dim, std::size_t pred_dim,
                                  const DiscriminatorShape& shape, std::uint64_t seed);

/// Convenience: runs the discriminator and returns the probabilities as a vector.
std::vector<double> forward_discriminator(const Discriminator& d, const Tensor& x, const Tensor& y_hat,
                                          const Tensor& g);

}  // namespace flexssl

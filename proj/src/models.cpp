#include "flexssl/models.hpp"

#include <fmt/format.h>

#include <cmath>
#include <stdexcept>

namespace flexssl {

TaskKind TaskKind::classification(std::size_t k) {
    if (k < 2) throw std::invalid_argument(fmt::format("classification needs k >= 2, got {}", k));
    return {Kind::classification, k};
}

TaskKind TaskKind::regression(std::size_t out_dim) {
    if (out_dim < 1) throw std::invalid_argument("regression needs out_dim >= 1");
    return {Kind::regression, out_dim};
}

// ---- Mlp -------------------------------------------------------------------

Mlp::Mlp(ParamStore& store, const std::string& prefix, std::vector<std::size_t> dims, Activation act,
         bool activate_last, Rng& rng)
    : dims_(std::move(dims)), act_(act), activate_last_(activate_last) {
    if (dims_.size() < 2) throw std::invalid_argument("mlp: need at least input and output dims");
    for (std::size_t d : dims_) {
        if (d == 0) throw std::invalid_argument(fmt::format("mlp {}: zero-width layer", prefix));
    }
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        const std::size_t fan_in = dims_[l], fan_out = dims_[l + 1];
        std::normal_distribution<double> init(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
        std::vector<double> w(fan_in * fan_out);
        for (double& v : w) v = init(rng);
        slots_.push_back(store.size());
        store.add(fmt::format("{}.w{}", prefix, l), Tensor::parameter({fan_in, fan_out}, std::move(w)));
        store.add(fmt::format("{}.b{}", prefix, l),
                  Tensor::parameter({fan_out}, std::vector<double>(fan_out, 0.0)));
    }
}

Tensor Mlp::forward(const ParamStore& store, Tensor x) const {
    const auto& entries = store.entries();
    for (std::size_t l = 0; l < slots_.size(); ++l) {
        x = affine(x, entries[slots_[l]].param, entries[slots_[l] + 1].param);
        if (l + 1 < slots_.size() || activate_last_) {
            x = act_ == Activation::relu ? relu(x) : flexssl::tanh(x);
        }
    }
    return x;
}

// ---- MainModel -------------------------------------------------------------

MainModel build_main_model(TaskKind task, std::size_t input_dim, std::vector<std::size_t> hidden_widths,
                           std::uint64_t seed, Activation act) {
    if (input_dim < 1) throw std::invalid_argument("main model: input_dim must be >= 1");
    MainModel f;
    f.task_ = task;
    f.input_dim_ = input_dim;
    f.hidden_ = hidden_widths;
    f.act_ = act;
    std::vector<std::size_t> dims{input_dim};
    dims.insert(dims.end(), hidden_widths.begin(), hidden_widths.end());
    dims.push_back(task.out_dim());
    Rng rng = make_rng(seed, "main-model");
    f.net_ = Mlp(f.params_, "f", std::move(dims), act, false, rng);
    return f;
}

Tensor MainModel::forward(const Tensor& x) const {
    if (x.shape().size() != 2 || x.shape()[1] != input_dim_) {
        throw ShapeError(fmt::format("main model: expected n×{} input, got {}", input_dim_, shape_str(x.shape())));
    }
    Tensor out = net_.forward(params_, x);
    return task_.is_classification() ? softmax_rows(out) : out;
}

MainModel MainModel::clone() const {
    MainModel c = *this;
    c.params_ = params_.clone();
    return c;
}

namespace {
const char* activation_name(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw std::invalid_argument("unknown activation: " + s);
}
}  // namespace

nlohmann::json MainModel::to_json() const {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& e : params_.entries()) {
        params[e.name] = std::vector<double>(e.param.values().begin(), e.param.values().end());
    }
    return {
        {"task", task_.name()},
        {"dims", {{"input", input_dim_}, {"output", task_.out_dim()}, {"hidden", hidden_}}},
        {"activation", activation_name(act_)},
        {"params", params},
    };
}

MainModel MainModel::from_json(const nlohmann::json& j) {
    const auto task_name = j.at("task").get<std::string>();
    const auto& dims = j.at("dims");
    auto as_dim = [](const nlohmann::json& v) {
        if (!v.is_number_integer() || v.get<long long>() < 0) {
            throw std::invalid_argument("model json: dimensions must be non-negative integers");
        }
        return v.get<std::size_t>();
    };
    const std::size_t out = as_dim(dims.at("output"));
    TaskKind task;
    if (task_name == "classification") task = TaskKind::classification(out);
    else if (task_name == "regression") task = TaskKind::regression(out);
    else throw std::invalid_argument("model json: unknown task " + task_name);
    std::vector<std::size_t> hidden;
    for (const auto& h : dims.at("hidden")) hidden.push_back(as_dim(h));
    Activation act = parse_activation(j.value("activation", std::string("relu")));

    MainModel f = build_main_model(task, as_dim(dims.at("input")), hidden, 0, act);
    const auto& params = j.at("params");
    if (params.size() != f.params_.size()) {
        throw std::invalid_argument(fmt::format("model json: expected {} parameter arrays, got {}",
                                                f.params_.size(), params.size()));
    }
    for (auto& e : f.params_.entries()) {
        auto values = params.at(e.name).get<std::vector<double>>();
        if (values.size() != e.param.size()) {
            throw std::invalid_argument(fmt::format("model json: parameter {} has {} values, expected {}",
                                                    e.name, values.size(), e.param.size()));
        }
        std::copy(values.begin(), values.end(), e.param.mutable_values().begin());
    }
    return f;
}

// ---- Discriminator ---------------------------------------------------------

namespace {
constexpr double kLogitBound = 30.0;
}

Discriminator build_discriminator(std::size_t input_dim, std::size_t pred_dim, const DiscriminatorShape& shape,
                                  std::uint64_t seed) {
    if (shape.x_widths.empty() || shape.y_widths.empty()) {
        throw std::invalid_argument("discriminator: extractors need at least one layer");
    }
    if (shape.x_widths.back() != shape.y_widths.back()) {
        throw std::invalid_argument(fmt::format(
            "discriminator: Hadamard fusion needs equal embedding widths, got {} and {}",
            shape.x_widths.back(), shape.y_widths.back()));
    }
    Discriminator d;
    Rng rng = make_rng(seed, "discriminator");
    std::vector<std::size_t> xdims{input_dim};
    xdims.insert(xdims.end(), shape.x_widths.begin(), shape.x_widths.end());
    std::vector<std::size_t> ydims{pred_dim};
    ydims.insert(ydims.end(), shape.y_widths.begin(), shape.y_widths.end());
    d.x_net_ = Mlp(d.params_, "dx", std::move(xdims), Activation::relu, true, rng);
    d.y_net_ = Mlp(d.params_, "dy", std::move(ydims), Activation::relu, true, rng);
    d.head_ = Mlp(d.params_, "dh", {shape.x_widths.back() + 1, 1}, Activation::relu, false, rng);
    return d;
}

Tensor Discriminator::forward(const Tensor& x, const Tensor& y_hat, const Tensor& g) const {
    if (x.rows() != y_hat.rows() || x.rows() != g.rows()) {
        throw ShapeError(fmt::format("discriminator: row counts differ: X {}, Ŷ {}, g {}", shape_str(x.shape()),
                                     shape_str(y_hat.shape()), shape_str(g.shape())));
    }
    Tensor ex = x_net_.forward(params_, x.detach());
    Tensor ey = y_net_.forward(params_, y_hat.detach());
    Tensor fused = concat_cols(hadamard(ex, ey), g.detach());
    // sigmoid(±30) stays representably inside (0, 1)
    return sigmoid(clamp(head_.forward(params_, fused), -kLogitBound, kLogitBound));
}

Discriminator Discriminator::clone() const {
    Discriminator c = *this;
    c.params_ = params_.clone();
    return c;
}

std::vector<double> forward_discriminator(const Discriminator& d, const Tensor& x, const Tensor& y_hat,
                                          const Tensor& g) {
    Tensor p = d.forward(x, y_hat, g);
    return {p.values().begin(), p.values().end()};
}

}  // namespace flexssl

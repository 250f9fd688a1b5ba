#include "flexssl/optim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flexssl {

Tensor ParamStore::add(std::string name, Tensor param) {
    auto clash = std::find_if(entries_.begin(), entries_.end(),
                              [&](const Entry& e) { return e.name == name; });
    if (clash != entries_.end()) throw std::invalid_argument("duplicate parameter name: " + name);
    if (!param.requires_grad() || !param.is_leaf()) {
        throw std::invalid_argument("parameter " + name + " must be a learnable leaf");
    }
    const auto n = param.size();
    entries_.push_back({std::move(name), std::move(param), std::vector<double>(n, 0.0),
                        std::vector<double>(n, 0.0)});
    return entries_.back().param;
}

const Tensor& ParamStore::get(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e.param;
    throw std::out_of_range("unknown parameter: " + name);
}

Tensor& ParamStore::get(const std::string& name) {
    return const_cast<Tensor&>(std::as_const(*this).get(name));
}

std::size_t ParamStore::param_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.param.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& e : entries_) e.param.zero_grad();
}

void ParamStore::clear_grad() {
    for (auto& e : entries_) e.param.clear_grad();
}

void ParamStore::adam_step(const AdamOptions& opt) {
    if (!(opt.lr > 0.0) || opt.beta1 < 0.0 || opt.beta1 >= 1.0 || opt.beta2 < 0.0 ||
        opt.beta2 >= 1.0 || !(opt.eps > 0.0)) {
        throw std::invalid_argument(fmt::format("adam: invalid options lr={} betas=({}, {}) eps={}",
                                                opt.lr, opt.beta1, opt.beta2, opt.eps));
    }
    for (const auto& e : entries_) {
        if (!e.param.has_grad()) throw std::logic_error("adam: parameter " + e.name + " has no gradient");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t_));
    for (auto& e : entries_) {
        auto g = e.param.grad();
        auto x = e.param.mutable_values();
        for (std::size_t i = 0; i < x.size(); ++i) {
            e.m[i] = opt.beta1 * e.m[i] + (1.0 - opt.beta1) * g[i];
            e.v[i] = opt.beta2 * e.v[i] + (1.0 - opt.beta2) * g[i] * g[i];
            const double mhat = e.m[i] / bc1;
            const double vhat = e.v[i] / bc2;
            x[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
        }
        e.param.clear_grad();
    }
}

ParamStore ParamStore::clone() const {
    ParamStore out;
    for (const auto& e : entries_) {
        auto v = e.param.values();
        out.entries_.push_back({e.name, Tensor::parameter(e.param.shape(), {v.begin(), v.end()}), e.m, e.v});
    }
    out.t_ = t_;
    return out;
}

}  // namespace flexssl

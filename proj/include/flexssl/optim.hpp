#pragma once

#include "flexssl/tensor.hpp"

#include <string>
#include <vector>

namespace flexssl {

struct AdamOptions {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Ordered named parameters with per-parameter Adam moments.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor param;
        std::vector<double> m;
        std::vector<double> v;
    };

    /// Registers a learnable tensor; names must be unique.
    Tensor add(std::string name, Tensor param);  // returns a handle sharing the stored node

    const Tensor& get(const std::string& name) const;
    Tensor& get(const std::string& name);

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t param_count() const;
    std::size_t step_count() const { return t_; }

    void zero_grad();
    void clear_grad();

    /// One Adam update with bias correction. Every parameter must carry a
    /// gradient; grads are cleared afterwards and the step counter advances.
    void adam_step(const AdamOptions& opt);

    /// Deep copy: fresh leaf tensors with the same values and optimizer state.
    ParamStore clone() const;

private:
    std::vector<Entry> entries_;
    std::size_t t_ = 0;
};

}  // namespace flexssl

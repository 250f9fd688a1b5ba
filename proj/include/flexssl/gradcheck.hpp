#pragma once

#include "flexssl/optim.hpp"

#include <functional>

namespace flexssl {

/// Builds a fresh graph from the current parameter values and returns the
/// scalar objective.
using Objective = std::function<Tensor()>;

/// Compares reverse-mode gradients against central differences with step h.
/// Returns max over all parameter entries of
/// |analytic - numeric| / max(1, |numeric|). Parameter values are restored.
double finite_diff_check(const Objective& objective, ParamStore& params, double h = 1e-5);

}  // namespace flexssl

#pragma once

#include "flexssl/tensor.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace flexssl {

/// Index of the largest entry in each row (first one on ties).
std::vector<std::size_t> argmax_rows(const Matrix& m);

/// Fraction of rows in `idx` whose argmax matches the class index in `labels`.
double accuracy(const Matrix& probs, const Matrix& labels);
double accuracy(const Matrix& probs, const Matrix& labels, std::span<const std::size_t> idx);

double mean_squared_error(const Matrix& pred, const Matrix& target);
double mean_squared_error(const Matrix& pred, const Matrix& target, std::span<const std::size_t> idx);

/// Area under the ROC curve of `scores` for positives (mask 1) vs negatives,
/// via the Mann-Whitney rank statistic with tied ranks averaged. Empty when
/// either class is absent.
std::optional<double> auc_mann_whitney(std::span<const double> scores, std::span<const std::uint8_t> mask);

double mean_of(std::span<const double> v);
/// Mean over the listed indices; empty when `idx` is empty.
std::optional<double> mean_at(std::span<const double> v, std::span<const std::size_t> idx);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_std(std::span<const double> v);

}  // namespace flexssl

#include "flexssl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace flexssl {

std::vector<std::size_t> argmax_rows(const Matrix& m) {
    std::vector<std::size_t> out(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        auto r = m.row(i);
        out[i] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return out;
}

double accuracy(const Matrix& probs, const Matrix& labels, std::span<const std::size_t> idx) {
    if (idx.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i : idx) {
        auto r = probs.row(i);
        const auto pred = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
        if (static_cast<double>(pred) == labels(i, 0)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(idx.size());
}

double accuracy(const Matrix& probs, const Matrix& labels) {
    std::vector<std::size_t> idx(probs.rows);
    std::iota(idx.begin(), idx.end(), 0);
    return accuracy(probs, labels, idx);
}

double mean_squared_error(const Matrix& pred, const Matrix& target, std::span<const std::size_t> idx) {
    if (pred.cols != target.cols) throw std::invalid_argument("mse: column counts differ");
    if (idx.empty() || pred.cols == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i : idx)
        for (std::size_t j = 0; j < pred.cols; ++j) {
            const double e = pred(i, j) - target(i, j);
            acc += e * e;
        }
    return acc / static_cast<double>(idx.size() * pred.cols);
}

double mean_squared_error(const Matrix& pred, const Matrix& target) {
    std::vector<std::size_t> idx(pred.rows);
    std::iota(idx.begin(), idx.end(), 0);
    return mean_squared_error(pred, target, idx);
}

std::optional<double> auc_mann_whitney(std::span<const double> scores, std::span<const std::uint8_t> mask) {
    if (scores.size() != mask.size()) throw std::invalid_argument("auc: scores and mask differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t) {
            if (mask[order[t]]) {
                rank_sum_pos += avg_rank;
                ++n_pos;
            }
        }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;
    const double np = static_cast<double>(n_pos);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double mean_of(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::optional<double> mean_at(std::span<const double> v, std::span<const std::size_t> idx) {
    if (idx.empty()) return std::nullopt;
    double s = 0.0;
    for (std::size_t i : idx) s += v[i];
    return s / static_cast<double>(idx.size());
}

double sample_std(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace flexssl

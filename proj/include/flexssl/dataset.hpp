#pragma once

#include "flexssl/models.hpp"
#include "flexssl/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

namespace flexssl {

/// Malformed dataset input or an impossible masking request.
class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Features, ground-truth labels and the observability mask.
///
/// For classification `y` holds one class index per row. Ground truth for
/// unlabeled rows is kept for evaluation only; training code receives the
/// working labels and the mask, never `y` itself.
struct SemiDataset {
    TaskKind task;
    Matrix x;
    Matrix y;
    std::vector<std::uint8_t> mask;     // 1 = label observed
    std::vector<std::size_t> labeled;   // rows with mask 1, ascending
    std::vector<std::size_t> unlabeled; // rows with mask 0, ascending
    std::vector<std::size_t> noisy;     // labeled rows whose label was corrupted, ascending

    std::size_t size() const { return x.rows; }
    std::size_t features() const { return x.cols; }
    double missing_fraction() const;

    /// Recomputes labeled/unlabeled from the mask.
    void reindex();
    /// Throws DatasetError when an invariant does not hold.
    void validate() const;
};

/// Two interleaving half circles: class 0 on (cos t, sin t), class 1 on
/// (1 - cos t, 0.5 - sin t), t ~ U[0, pi], plus isotropic Gaussian noise.
/// Class 0 takes the extra point when n is odd. All labels observed.
SemiDataset gen_two_moons(std::size_t n, double noise_sigma, std::uint64_t seed);

struct TabularOptions {
    bool nonlinear = true;  // include sin(Xv)
    bool noise = true;      // include N(0, 0.1) target noise
};

/// y = Xw + sin(Xv) + eps with X ~ N(0, I). w and v depend only on (d, seed).
SemiDataset gen_tabular_regression(std::size_t n, std::size_t d, std::uint64_t seed, TabularOptions opt = {});
/// The linear coefficients w used by gen_tabular_regression for (d, seed).
std::vector<double> tabular_coefficients(std::size_t d, std::uint64_t seed);

/// Hides exactly floor(rate * n) currently-observed labels, chosen by a seeded
/// shuffle. Redraws when a class would lose all its labels.
SemiDataset apply_missing(SemiDataset ds, double rate, std::uint64_t seed);

/// Corrupts floor(noise_rate * |L|) observed labels: a uniformly drawn
/// different class, or +5 standard deviations for regression.
SemiDataset inject_label_noise(SemiDataset ds, double noise_rate, std::uint64_t seed);

/// Rows [0, first) and [first, n) as two datasets; masks and noise indices follow their rows.
std::pair<SemiDataset, SemiDataset> split_rows(const SemiDataset& ds, std::size_t first);

/// CSV with header x0..x{d-1},y,observed. When `task` is not given the file is
/// read as classification if every y is a non-negative integer, else as
/// single-output regression.
SemiDataset load_csv(const std::filesystem::path& path, std::optional<TaskKind> task = std::nullopt);
void save_csv(const SemiDataset& ds, const std::filesystem::path& path);

}  // namespace flexssl

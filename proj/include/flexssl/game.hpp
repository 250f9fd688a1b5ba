#pragma once

// The semi-cooperative training game between a main-task model f and a
// label-observability discriminator d.
//
// Each minibatch: f predicts Ŷ, the elementwise task loss g(Ỹ, Ŷ) is handed
// to d together with X and Ŷ, d outputs the probability P that each working
// label is a genuine observed label and takes one step on its binary loss
// against the mask M. P is then turned into per-sample soft-labeling weights W
// and f takes one step on mean(W ⊙ g). P is a constant for f, and Ŷ, g are
// constants for d.

#include "flexssl/dataset.hpp"
#include "flexssl/models.hpp"
#include "flexssl/optim.hpp"
#include "flexssl/rng.hpp"

#include "json.hpp"

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flexssl {

enum class LossVariant { bce, exponential, logistic };

std::string variant_name(LossVariant v);  // "bce" | "exp" | "logistic"
LossVariant parse_variant(const std::string& s);

struct GameConfig {
    double alpha = 0.6;
    LossVariant variant = LossVariant::bce;
    double clip = 10.0;
    std::size_t refresh_interval = 10;
    std::size_t epochs = 300;
    std::size_t batch_size = 64;
    double lr_f = 0.001;  // 0.01 sets off a runaway on the toy MLPs; see README
    double lr_d = 0.001;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

nlohmann::json to_json(const GameConfig& cfg);
/// Requires exactly the GameConfig field names; unknown keys are rejected,
/// missing keys keep their defaults.
GameConfig game_config_from_json(const nlohmann::json& j);

/// Architecture shared by every arm of an experiment.
struct ModelConfig {
    std::vector<std::size_t> hidden{32, 32};
    DiscriminatorShape discriminator;
    Activation activation = Activation::relu;
};

/// Main model for a run, seeded from the run seed.
MainModel build_run_model(const TaskKind& task, std::size_t input_dim, const ModelConfig& mc, std::uint64_t seed);

/// Raised when a loss turns non-finite mid-run.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::size_t epoch, std::size_t batch, const std::string& what);
    std::size_t epoch() const { return epoch_; }
    std::size_t batch() const { return batch_; }

private:
    std::size_t epoch_;
    std::size_t batch_;
};

// ---- losses and weights ----------------------------------------------------

/// Training targets as a tensor: one-hot n×k for classification (from an
/// n×1 class-index matrix), the raw n×out matrix for regression.
Tensor target_tensor(const TaskKind& task, const Matrix& labels);

/// Per-sample task loss, n×1: cross entropy with probabilities floored at
/// 1e-12 for classification, squared error averaged over outputs for
/// regression. `targets` may be class indices (n×1) or one-hot (n×k).
Tensor elementwise_loss_a(const TaskKind& task, const Tensor& targets, const Tensor& y_hat);

/// Table of soft-labeling weights, one per sample.
///
///   variant      observed (M=1)             unobserved (M=0)
///   bce          1 + α·min(1/p, H)          1 − α·min(1/(1−p), H)
///   exponential  1 + α·e^(−p)               1 − α·e^p
///   logistic     1 + α·e^(−p)/(1+e^(−p))    1 − α·e^p/(1+e^p)
///
/// Rejects p outside the open interval (0, 1).
std::vector<double> soft_weights(LossVariant variant, std::span<const double> p, std::span<const std::uint8_t> mask,
                                 double alpha, double clip);

/// mean(W ⊙ g). W is a constant; gradient flows only through g.
Tensor main_loss(const Tensor& g, std::span<const double> weights);

/// Binary loss of d's probabilities against the mask, averaged over the batch.
Tensor discriminator_loss(LossVariant variant, const Tensor& p, std::span<const std::uint8_t> mask);

// ---- pseudo labels ---------------------------------------------------------

struct PseudoState {
    Matrix labels;                      // working labels Ỹ, same layout as SemiDataset::y
    std::vector<std::uint8_t> mask;     // copy of the dataset mask
    std::size_t round = 0;
    std::vector<double> accuracy_history;  // per refresh; MSE for regression
};

/// Observed rows keep their labels. Unobserved rows get a uniformly random
/// class, or the labeled mean plus N(0, 0.1·σ_L) noise per output.
PseudoState init_pseudo_labels(const SemiDataset& ds, std::uint64_t seed);

/// Overwrites unobserved labels with f's hard predictions (argmax or raw output)
/// and records their quality against the held-out ground truth.
PseudoState refresh_pseudo_labels(const MainModel& f, const PseudoState& state, const SemiDataset& ds);

/// Quality of f's current predictions on the unobserved rows: accuracy for
/// classification, MSE for regression. Returns nullopt when U is empty.
std::optional<double> pseudo_label_quality(const MainModel& f, const SemiDataset& ds);

// ---- training --------------------------------------------------------------

struct EpochMetrics {
    std::string run_id;
    std::string method;
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
    double loss_a = 0.0;
    std::optional<double> loss_b;
    std::optional<double> test_metric;
    std::optional<double> pseudo_acc;
    std::optional<double> mean_p_labeled;
    std::optional<double> mean_p_unlabeled;
    std::optional<double> auc_p_mask;
    double wall_ms = 0.0;
};

struct RunResult {
    std::vector<EpochMetrics> history;
    MainModel model;
    std::optional<Discriminator> discriminator;
    std::vector<double> final_p;               // d's output on every training row (FlexSSL only)
    std::vector<double> pseudo_history;        // per labeling/refresh round
    std::vector<std::size_t> admitted;         // self-training: rows in admission order
    std::vector<std::size_t> admitted_counts;  // self-training: admitted set size after each round
};

/// Test-only overrides.
struct TrainHooks {
    /// Replaces soft_weights when set.
    std::function<std::vector<double>(std::span<const double> p, std::span<const std::uint8_t> mask)> weights;
};

/// What the training loop may see: features, working labels and mask.
struct TrainingView {
    const TaskKind& task;
    const Matrix& x;
    const Matrix& labels;
    std::span<const std::uint8_t> mask;
};

/// One Adam step of f on mean(W ⊙ g). Returns the loss value.
double main_model_step(MainModel& f, const Tensor& x, const Tensor& targets, std::span<const double> weights,
                       const AdamOptions& opt);

/// One Adam step of f on the unweighted mean(g). Returns the loss value.
double supervised_step(MainModel& f, const Tensor& x, const Tensor& targets, const AdamOptions& opt);

/// One pass over the shuffled training rows. Fills loss_a and loss_b (batch
/// means); evaluation fields are left to the caller.
EpochMetrics train_epoch(MainModel& f, Discriminator& d, const TrainingView& data, const GameConfig& cfg,
                         Rng& rng, std::size_t epoch, const TrainHooks* hooks = nullptr);

/// d's probabilities on every row of `data` under the current f.
std::vector<double> discriminator_probabilities(const MainModel& f, const Discriminator& d, const TrainingView& data);

/// Called once before training (epoch 0) and after every epoch with d's
/// probabilities on all training rows.
using GameObserver = std::function<void(std::size_t epoch, std::span<const double> p)>;

struct RunOptions {
    const SemiDataset* test = nullptr;
    ModelConfig model;
    GameObserver observer;
    const TrainHooks* hooks = nullptr;
    std::string method = "flexssl";
    std::string run_id;
    bool timing = true;
};

/// Initializes pseudo labels and both models from cfg.seed, then trains for
/// cfg.epochs epochs with a refresh every cfg.refresh_interval epochs.
RunResult run_game(const GameConfig& cfg, const SemiDataset& ds, const RunOptions& opt = {});

/// Test metric of f on a dataset: accuracy or MSE over all rows.
double evaluate(const MainModel& f, const SemiDataset& ds);

}  // namespace flexssl

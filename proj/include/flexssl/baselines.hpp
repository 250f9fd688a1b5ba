#pragma once

// Comparison arms: plain supervised training on the observed labels, and
// classic confidence-threshold self-training.

#include "flexssl/dataset.hpp"
#include "flexssl/game.hpp"

namespace flexssl {

struct SupervisedConfig {
    std::size_t epochs = 300;
    std::size_t batch_size = 64;
    double lr = 0.001;
    std::uint64_t seed = 0;
};

struct SelfTrainConfig {
    /// Admission requires max class probability strictly above tau, so
    /// tau = 1 never admits anything.
    double tau = 0.95;
    std::size_t interval = 10;
    std::size_t epochs = 300;
    std::size_t batch_size = 64;
    double lr = 0.001;
    std::uint64_t seed = 0;
};

struct BaselineOptions {
    const SemiDataset* test = nullptr;
    std::string run_id;
    bool timing = true;
};

/// Trains f on the observed rows only with the unweighted task loss.
RunResult train_supervised(MainModel f, const SemiDataset& ds, const SupervisedConfig& cfg,
                           const BaselineOptions& opt = {});

/// Supervised training plus, every `interval` epochs, admission of unobserved
/// rows whose confidence exceeds tau. Admitted rows keep the predicted label
/// they were admitted with for the rest of the run.
RunResult train_self_training(MainModel f, const SemiDataset& ds, const SelfTrainConfig& cfg,
                              const BaselineOptions& opt = {});

}  // namespace flexssl

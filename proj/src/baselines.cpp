#include "flexssl/baselines.hpp"

#include "flexssl/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace flexssl {

namespace {

struct LoopConfig {
    std::size_t epochs;
    std::size_t batch_size;
    double lr;
    std::uint64_t seed;
    std::size_t interval;  // 0 disables admission rounds
    double tau;
    const char* method;
};

RunResult train_on_working_set(MainModel f, const SemiDataset& ds, const LoopConfig& cfg, const BaselineOptions& opt) {
    ds.validate();
    if (ds.labeled.empty()) throw std::invalid_argument(fmt::format("{}: no labeled rows", cfg.method));
    if (cfg.batch_size == 0) throw std::invalid_argument(fmt::format("{}: batch_size must be positive", cfg.method));
    if (!(cfg.lr > 0.0)) throw std::invalid_argument(fmt::format("{}: lr must be positive", cfg.method));

    // Working labels: ground truth for observed rows; admitted rows get their
    // frozen prediction. Unobserved rows are never read until admitted.
    Matrix labels(ds.size(), ds.y.cols);
    for (std::size_t i : ds.labeled) std::copy(ds.y.row(i).begin(), ds.y.row(i).end(), labels.row(i).begin());
    std::vector<std::size_t> working = ds.labeled;
    std::vector<bool> admitted(ds.size(), false);

    Rng rng = make_rng(cfg.seed, "batches");
    const AdamOptions adam{.lr = cfg.lr};
    RunResult result;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::size_t> order = working;
        std::shuffle(order.begin(), order.end(), rng);
        double sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batches) {
            std::span<const std::size_t> idx(order.data() + start, std::min(cfg.batch_size, order.size() - start));
            Tensor xb = Tensor::constant(ds.x.select_rows(idx));
            Tensor tb = target_tensor(ds.task, labels.select_rows(idx));
            const double loss = supervised_step(f, xb, tb, adam);
            if (!std::isfinite(loss)) throw DivergenceError(epoch, batches, "non-finite task loss");
            sum += loss;
        }

        EpochMetrics m;
        if (cfg.interval > 0 && epoch % cfg.interval == 0) {
            std::vector<std::size_t> candidates;
            for (std::size_t j : ds.unlabeled)
                if (!admitted[j]) candidates.push_back(j);
            if (!candidates.empty()) {
                Matrix probs = f.forward(Tensor::constant(ds.x.select_rows(candidates))).to_matrix();
                for (std::size_t r = 0; r < candidates.size(); ++r) {
                    auto row = probs.row(r);
                    const auto best = std::max_element(row.begin(), row.end());
                    if (*best > cfg.tau) {
                        const std::size_t j = candidates[r];
                        admitted[j] = true;
                        labels(j, 0) = static_cast<double>(best - row.begin());
                        working.push_back(j);
                        result.admitted.push_back(j);
                    }
                }
            }
            result.admitted_counts.push_back(result.admitted.size());
            if (auto q = pseudo_label_quality(f, ds)) result.pseudo_history.push_back(*q);
        }

        m.run_id = opt.run_id;
        m.method = cfg.method;
        m.seed = cfg.seed;
        m.epoch = epoch;
        m.loss_a = batches ? sum / static_cast<double>(batches) : 0.0;
        if (opt.test) m.test_metric = evaluate(f, *opt.test);
        if (!result.pseudo_history.empty()) m.pseudo_acc = result.pseudo_history.back();
        if (opt.timing) {
            m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        }
        result.history.push_back(std::move(m));
    }
    result.model = std::move(f);
    return result;
}

}  // namespace

RunResult train_supervised(MainModel f, const SemiDataset& ds, const SupervisedConfig& cfg, const BaselineOptions& opt) {
    return train_on_working_set(std::move(f), ds,
                                {cfg.epochs, cfg.batch_size, cfg.lr, cfg.seed, 0, 1.0, "supervised"}, opt);
}

RunResult train_self_training(MainModel f, const SemiDataset& ds, const SelfTrainConfig& cfg, const BaselineOptions& opt) {
    if (!f.task().is_classification()) throw std::invalid_argument("self-training: classification task required");
    if (!(cfg.tau > 0.5 && cfg.tau <= 1.0)) throw std::invalid_argument(fmt::format("self-training: tau {} outside (0.5, 1]", cfg.tau));
    if (cfg.interval == 0) throw std::invalid_argument("self-training: interval must be positive");
    return train_on_working_set(std::move(f), ds,
                                {cfg.epochs, cfg.batch_size, cfg.lr, cfg.seed, cfg.interval, cfg.tau, "self-training"},
                                opt);
}

}  // namespace flexssl

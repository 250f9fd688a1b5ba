#include "flexssl/game.hpp"

#include "flexssl/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

namespace flexssl {

namespace {
constexpr double kProbFloor = 1e-12;
}

std::string variant_name(LossVariant v) {
    switch (v) {
        case LossVariant::bce: return "bce";
        case LossVariant::exponential: return "exp";
        case LossVariant::logistic: return "logistic";
    }
    return "?";
}

LossVariant parse_variant(const std::string& s) {
    if (s == "bce") return LossVariant::bce;
    if (s == "exp" || s == "exponential") return LossVariant::exponential;
    if (s == "logistic") return LossVariant::logistic;
    throw std::invalid_argument("unknown loss variant '" + s + "' (expected bce, exp or logistic)");
}

void GameConfig::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument(fmt::format("alpha {} outside (0, 1]", alpha));
    if (!(clip > 1.0)) throw std::invalid_argument(fmt::format("clip {} must exceed 1", clip));
    if (refresh_interval == 0) throw std::invalid_argument("refresh_interval must be positive");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (!(lr_f > 0.0)) throw std::invalid_argument(fmt::format("lr_f {} must be positive", lr_f));
    if (!(lr_d > 0.0)) throw std::invalid_argument(fmt::format("lr_d {} must be positive", lr_d));
}

nlohmann::json to_json(const GameConfig& cfg) {
    return {
        {"alpha", cfg.alpha},
        {"variant", variant_name(cfg.variant)},
        {"clip", cfg.clip},
        {"refresh_interval", cfg.refresh_interval},
        {"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"lr_f", cfg.lr_f},
        {"lr_d", cfg.lr_d},
        {"seed", cfg.seed},
    };
}

GameConfig game_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("game config must be a JSON object");
    static const std::set<std::string> known{"alpha", "variant", "clip", "refresh_interval", "epochs",
                                             "batch_size", "lr_f", "lr_d", "seed"};
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw std::invalid_argument("unknown game config field: " + key);
    }
    auto count = [&](const char* key, std::size_t fallback) -> std::size_t {
        if (!j.contains(key)) return fallback;
        const auto& v = j.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0) {
            throw std::invalid_argument(fmt::format("{} must be a non-negative integer", key));
        }
        return v.get<std::size_t>();
    };
    auto real = [&](const char* key, double fallback) -> double {
        if (!j.contains(key)) return fallback;
        if (!j.at(key).is_number()) throw std::invalid_argument(fmt::format("{} must be a number", key));
        return j.at(key).get<double>();
    };
    GameConfig cfg;
    cfg.alpha = real("alpha", cfg.alpha);
    if (j.contains("variant")) cfg.variant = parse_variant(j.at("variant").get<std::string>());
    cfg.clip = real("clip", cfg.clip);
    cfg.refresh_interval = count("refresh_interval", cfg.refresh_interval);
    cfg.epochs = count("epochs", cfg.epochs);
    cfg.batch_size = count("batch_size", cfg.batch_size);
    cfg.lr_f = real("lr_f", cfg.lr_f);
    cfg.lr_d = real("lr_d", cfg.lr_d);
    cfg.seed = count("seed", cfg.seed);
    cfg.validate();
    return cfg;
}

MainModel build_run_model(const TaskKind& task, std::size_t input_dim, const ModelConfig& mc, std::uint64_t seed) {
    return build_main_model(task, input_dim, mc.hidden, derive_seed(seed, "f"), mc.activation);
}

DivergenceError::DivergenceError(std::size_t epoch, std::size_t batch, const std::string& what)
    : std::runtime_error(fmt::format("diverged at epoch {}, batch {}: {}", epoch, batch, what)),
      epoch_(epoch),
      batch_(batch) {}

// ---- losses and weights ----------------------------------------------------

Tensor target_tensor(const TaskKind& task, const Matrix& labels) {
    if (!task.is_classification()) return Tensor::constant(labels);
    const std::size_t k = task.out_dim();
    if (labels.cols != 1) throw ShapeError(fmt::format("targets: expected class indices n×1, got n×{}", labels.cols));
    std::vector<double> onehot(labels.rows * k, 0.0);
    for (std::size_t i = 0; i < labels.rows; ++i) {
        const double c = labels(i, 0);
        if (c < 0 || c >= static_cast<double>(k)) throw ShapeError(fmt::format("targets: class {} outside [0, {})", c, k));
        onehot[i * k + static_cast<std::size_t>(c)] = 1.0;
    }
    return Tensor::constant({labels.rows, k}, std::move(onehot));
}

Tensor elementwise_loss_a(const TaskKind& task, const Tensor& targets, const Tensor& y_hat) {
    if (y_hat.shape().size() != 2 || targets.shape().size() != 2 || targets.rows() != y_hat.rows()) {
        throw ShapeError(fmt::format("loss_A: shape mismatch {} vs {}", shape_str(targets.shape()),
                                     shape_str(y_hat.shape())));
    }
    if (task.is_classification()) {
        Tensor onehot = targets;
        if (targets.cols() == 1 && y_hat.cols() != 1) onehot = target_tensor(task, targets.to_matrix());
        if (onehot.shape() != y_hat.shape()) {
            throw ShapeError(fmt::format("loss_A: shape mismatch {} vs {}", shape_str(targets.shape()),
                                         shape_str(y_hat.shape())));
        }
        return scale(row_sum(mul(onehot.detach(), log(clamp_min(y_hat, kProbFloor)))), -1.0);
    }
    if (targets.shape() != y_hat.shape()) {
        throw ShapeError(fmt::format("loss_A: shape mismatch {} vs {}", shape_str(targets.shape()),
                                     shape_str(y_hat.shape())));
    }
    return row_mean(square(sub(y_hat, targets.detach())));
}

std::vector<double> soft_weights(LossVariant variant, std::span<const double> p, std::span<const std::uint8_t> mask,
                                 double alpha, double clip) {
    if (p.size() != mask.size()) {
        throw std::invalid_argument(fmt::format("soft_weights: {} probabilities for {} mask entries", p.size(), mask.size()));
    }
    std::vector<double> w(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = p[i];
        if (!(pi > 0.0 && pi < 1.0)) {
            throw std::invalid_argument(fmt::format("soft_weights: p[{}] = {} outside (0, 1)", i, pi));
        }
        const bool observed = mask[i] != 0;
        switch (variant) {
            case LossVariant::bce:
                w[i] = observed ? 1.0 + alpha * std::min(1.0 / pi, clip) : 1.0 - alpha * std::min(1.0 / (1.0 - pi), clip);
                break;
            case LossVariant::exponential:
                w[i] = observed ? 1.0 + alpha * std::exp(-pi) : 1.0 - alpha * std::exp(pi);
                break;
            case LossVariant::logistic:
                w[i] = observed ? 1.0 + alpha * std::exp(-pi) / (1.0 + std::exp(-pi))
                                : 1.0 - alpha * std::exp(pi) / (1.0 + std::exp(pi));
                break;
        }
    }
    return w;
}

Tensor main_loss(const Tensor& g, std::span<const double> weights) {
    if (g.size() != weights.size()) {
        throw ShapeError(fmt::format("main_loss: {} losses for {} weights", g.size(), weights.size()));
    }
    return mean(mul(Tensor::constant(g.shape(), {weights.begin(), weights.end()}), g));
}

Tensor discriminator_loss(LossVariant variant, const Tensor& p, std::span<const std::uint8_t> mask) {
    if (p.size() != mask.size()) {
        throw ShapeError(fmt::format("loss_B: {} probabilities for {} mask entries", p.size(), mask.size()));
    }
    for (double v : p.values()) {
        if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument(fmt::format("loss_B: p = {} outside (0, 1)", v));
    }
    std::vector<double> m(mask.begin(), mask.end());
    std::vector<double> not_m(m.size());
    std::transform(m.begin(), m.end(), not_m.begin(), [](double v) { return 1.0 - v; });
    Tensor obs = Tensor::constant(p.shape(), std::move(m));
    Tensor unobs = Tensor::constant(p.shape(), std::move(not_m));

    Tensor on_observed, on_unobserved;
    switch (variant) {
        case LossVariant::bce: {
            Tensor one_minus_p = add_scalar(scale(p, -1.0), 1.0);
            on_observed = scale(log(clamp_min(p, kProbFloor)), -1.0);
            on_unobserved = scale(log(clamp_min(one_minus_p, kProbFloor)), -1.0);
            break;
        }
        case LossVariant::exponential:
            on_observed = exp(scale(p, -1.0));
            on_unobserved = exp(p);
            break;
        case LossVariant::logistic:
            on_observed = log(add_scalar(exp(scale(p, -1.0)), 1.0));
            on_unobserved = log(add_scalar(exp(p), 1.0));
            break;
    }
    return mean(add(mul(obs, on_observed), mul(unobs, on_unobserved)));
}

// ---- pseudo labels ---------------------------------------------------------

PseudoState init_pseudo_labels(const SemiDataset& ds, std::uint64_t seed) {
    PseudoState st;
    st.labels = ds.y;
    st.mask = ds.mask;
    if (ds.unlabeled.empty()) return st;
    Rng rng = make_rng(seed, "pseudo-init");
    if (ds.task.is_classification()) {
        std::uniform_int_distribution<std::size_t> cls(0, ds.task.out_dim() - 1);
        for (std::size_t j : ds.unlabeled) st.labels(j, 0) = static_cast<double>(cls(rng));
        return st;
    }
    if (ds.labeled.empty()) throw std::invalid_argument("init_pseudo_labels: regression needs at least one label");
    const double nl = static_cast<double>(ds.labeled.size());
    for (std::size_t c = 0; c < ds.y.cols; ++c) {
        double mu = 0.0, sq = 0.0;
        for (std::size_t i : ds.labeled) mu += ds.y(i, c);
        mu /= nl;
        for (std::size_t i : ds.labeled) sq += (ds.y(i, c) - mu) * (ds.y(i, c) - mu);
        const double sigma = std::sqrt(sq / nl);
        if (sigma > 0.0) {
            std::normal_distribution<double> noise(0.0, 0.1 * sigma);
            for (std::size_t j : ds.unlabeled) st.labels(j, c) = mu + noise(rng);
        } else {
            for (std::size_t j : ds.unlabeled) st.labels(j, c) = mu;
        }
    }
    return st;
}

namespace {
Matrix predict(const MainModel& f, const Matrix& x) { return f.forward(Tensor::constant(x)).to_matrix(); }

double quality_on(const TaskKind& task, const Matrix& pred, const Matrix& truth, std::span<const std::size_t> idx) {
    return task.is_classification() ? accuracy(pred, truth, idx) : mean_squared_error(pred, truth, idx);
}
}  // namespace

std::optional<double> pseudo_label_quality(const MainModel& f, const SemiDataset& ds) {
    if (ds.unlabeled.empty()) return std::nullopt;
    Matrix xu = ds.x.select_rows(ds.unlabeled);
    Matrix yu = ds.y.select_rows(ds.unlabeled);
    std::vector<std::size_t> all(xu.rows);
    std::iota(all.begin(), all.end(), 0);
    return quality_on(ds.task, predict(f, xu), yu, all);
}

PseudoState refresh_pseudo_labels(const MainModel& f, const PseudoState& state, const SemiDataset& ds) {
    PseudoState next = state;
    ++next.round;
    if (ds.unlabeled.empty()) return next;
    Matrix pred = predict(f, ds.x.select_rows(ds.unlabeled));
    if (ds.task.is_classification()) {
        auto cls = argmax_rows(pred);
        for (std::size_t r = 0; r < ds.unlabeled.size(); ++r) next.labels(ds.unlabeled[r], 0) = static_cast<double>(cls[r]);
    } else {
        for (std::size_t r = 0; r < ds.unlabeled.size(); ++r) {
            auto src = pred.row(r);
            std::copy(src.begin(), src.end(), next.labels.row(ds.unlabeled[r]).begin());
        }
    }
    std::vector<std::size_t> all(pred.rows);
    std::iota(all.begin(), all.end(), 0);
    next.accuracy_history.push_back(quality_on(ds.task, pred, ds.y.select_rows(ds.unlabeled), all));
    return next;
}

// ---- training --------------------------------------------------------------

double main_model_step(MainModel& f, const Tensor& x, const Tensor& targets, std::span<const double> weights,
                       const AdamOptions& opt) {
    Tensor g = elementwise_loss_a(f.task(), targets, f.forward(x));
    Tensor loss = main_loss(g, weights);
    loss.backward();
    f.params().adam_step(opt);
    return loss.item();
}

double supervised_step(MainModel& f, const Tensor& x, const Tensor& targets, const AdamOptions& opt) {
    Tensor loss = mean(elementwise_loss_a(f.task(), targets, f.forward(x)));
    loss.backward();
    f.params().adam_step(opt);
    return loss.item();
}

EpochMetrics train_epoch(MainModel& f, Discriminator& d, const TrainingView& data, const GameConfig& cfg, Rng& rng,
                         std::size_t epoch, const TrainHooks* hooks) {
    const std::size_t n = data.x.rows;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    const AdamOptions opt_f{.lr = cfg.lr_f};
    const AdamOptions opt_d{.lr = cfg.lr_d};
    double sum_a = 0.0, sum_b = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batches) {
        std::span<const std::size_t> idx(order.data() + start, std::min(cfg.batch_size, n - start));
        Tensor xb = Tensor::constant(data.x.select_rows(idx));
        Tensor tb = target_tensor(data.task, data.labels.select_rows(idx));
        std::vector<std::uint8_t> mb(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) mb[r] = data.mask[idx[r]];

        Tensor y_hat = f.forward(xb);
        Tensor g = elementwise_loss_a(data.task, tb, y_hat);
        Tensor p = d.forward(xb, y_hat, g);

        Tensor loss_b = discriminator_loss(cfg.variant, p, mb);
        if (!std::isfinite(loss_b.item())) throw DivergenceError(epoch, batches, "non-finite discriminator loss");
        loss_b.backward();
        d.params().adam_step(opt_d);

        const auto w = hooks && hooks->weights ? hooks->weights(p.values(), mb)
                                               : soft_weights(cfg.variant, p.values(), mb, cfg.alpha, cfg.clip);
        Tensor loss_a = main_loss(g, w);
        if (!std::isfinite(loss_a.item())) throw DivergenceError(epoch, batches, "non-finite main loss");
        loss_a.backward();
        f.params().adam_step(opt_f);

        sum_a += loss_a.item();
        sum_b += loss_b.item();
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.loss_a = batches ? sum_a / static_cast<double>(batches) : 0.0;
    m.loss_b = batches ? sum_b / static_cast<double>(batches) : 0.0;
    return m;
}

std::vector<double> discriminator_probabilities(const MainModel& f, const Discriminator& d, const TrainingView& data) {
    Tensor x = Tensor::constant(data.x);
    Tensor y_hat = f.forward(x);
    Tensor g = elementwise_loss_a(data.task, target_tensor(data.task, data.labels), y_hat);
    return forward_discriminator(d, x, y_hat, g);
}

double evaluate(const MainModel& f, const SemiDataset& ds) {
    Matrix pred = predict(f, ds.x);
    return ds.task.is_classification() ? accuracy(pred, ds.y) : mean_squared_error(pred, ds.y);
}

RunResult run_game(const GameConfig& cfg, const SemiDataset& ds, const RunOptions& opt) {
    cfg.validate();
    ds.validate();
    RunResult result;
    MainModel f = build_run_model(ds.task, ds.features(), opt.model, cfg.seed);
    Discriminator d = build_discriminator(ds.features(), ds.task.out_dim(), opt.model.discriminator,
                                          derive_seed(cfg.seed, "d"));
    PseudoState state = init_pseudo_labels(ds, derive_seed(cfg.seed, "pseudo"));
    Rng rng = make_rng(cfg.seed, "batches");

    auto view = [&] { return TrainingView{ds.task, ds.x, state.labels, state.mask}; };
    std::vector<double> p = discriminator_probabilities(f, d, view());
    if (opt.observer) opt.observer(0, p);

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        EpochMetrics m = train_epoch(f, d, view(), cfg, rng, epoch, opt.hooks);
        if (epoch % cfg.refresh_interval == 0) state = refresh_pseudo_labels(f, state, ds);

        p = discriminator_probabilities(f, d, view());
        m.run_id = opt.run_id;
        m.method = opt.method;
        m.seed = cfg.seed;
        if (opt.test) m.test_metric = evaluate(f, *opt.test);
        if (!state.accuracy_history.empty()) m.pseudo_acc = state.accuracy_history.back();
        m.mean_p_labeled = mean_at(p, ds.labeled);
        m.mean_p_unlabeled = mean_at(p, ds.unlabeled);
        m.auc_p_mask = auc_mann_whitney(p, ds.mask);
        if (opt.timing) {
            m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        }
        result.history.push_back(std::move(m));
        if (opt.observer) opt.observer(epoch, p);
    }

    result.final_p = std::move(p);
    result.pseudo_history = state.accuracy_history;
    result.model = std::move(f);
    result.discriminator = std::move(d);
    return result;
}

}  // namespace flexssl

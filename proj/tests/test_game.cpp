#include "doctest.h"

#include "flexssl/dataset.hpp"
#include "flexssl/game.hpp"
#include "flexssl/gradcheck.hpp"
#include "flexssl/metrics.hpp"

#include <cmath>
#include <numeric>

using namespace flexssl;

namespace {

double w1(LossVariant v, double p, bool observed, double alpha = 0.6, double clip = 10.0) {
    const std::uint8_t m = observed ? 1 : 0;
    return soft_weights(v, std::span<const double>(&p, 1), std::span<const std::uint8_t>(&m, 1), alpha, clip)[0];
}

// Direct transcription of the weight table, written independently of the library.
double table_weight(int variant, double p, bool observed, double a, double h) {
    if (variant == 0) {
        if (observed) {
            const double r = 1.0 / p;
            return 1.0 + a * (r < h ? r : h);
        }
        const double r = 1.0 / (1.0 - p);
        return 1.0 - a * (r < h ? r : h);
    }
    if (variant == 1) return observed ? 1.0 + a * std::exp(-p) : 1.0 - a * std::exp(p);
    const double s_neg = std::exp(-p) / (1.0 + std::exp(-p));
    const double s_pos = std::exp(p) / (1.0 + std::exp(p));
    return observed ? 1.0 + a * s_neg : 1.0 - a * s_pos;
}

const LossVariant kVariants[] = {LossVariant::bce, LossVariant::exponential, LossVariant::logistic};

Tensor random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> v(n * d);
    for (auto& x : v) x = nd(rng);
    return Tensor::constant({n, d}, v);
}

SemiDataset moons(double missing, std::uint64_t seed, std::size_t n = 200) {
    return apply_missing(gen_two_moons(n, 0.2, seed), missing, seed);
}

std::vector<double> flat_params(const ParamStore& ps) {
    std::vector<double> out;
    for (const auto& e : ps.entries()) out.insert(out.end(), e.param.values().begin(), e.param.values().end());
    return out;
}

}  // namespace

TEST_CASE("weight table examples") {
    CHECK(w1(LossVariant::bce, 0.5, true) == doctest::Approx(2.2).epsilon(1e-15));
    CHECK(w1(LossVariant::bce, 0.01, true) == doctest::Approx(7.0).epsilon(1e-15));
    CHECK(w1(LossVariant::bce, 0.9, false) == doctest::Approx(-5.0).epsilon(1e-12));
    CHECK(w1(LossVariant::exponential, 1e-300, true, 1.0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(w1(LossVariant::logistic, 1e-300, true, 1.0) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("weights match an independent transcription on 10^4 random draws per variant") {
    Rng rng(2024);
    std::uniform_real_distribution<double> up(1e-9, 1.0 - 1e-9), ua(1e-6, 1.0);
    for (int v = 0; v < 3; ++v) {
        std::vector<double> p(10000);
        std::vector<std::uint8_t> m(10000);
        double max_err = 0.0;
        for (int rep = 0; rep < 4; ++rep) {
            const double a = ua(rng);
            for (std::size_t i = 0; i < p.size(); ++i) {
                p[i] = up(rng);
                m[i] = static_cast<std::uint8_t>(rng() & 1u);
            }
            auto w = soft_weights(kVariants[v], p, m, a, 10.0);
            for (std::size_t i = 0; i < p.size(); ++i) {
                max_err = std::max(max_err, std::abs(w[i] - table_weight(v, p[i], m[i] != 0, a, 10.0)));
            }
        }
        CHECK(max_err <= 1e-12);
    }
}

TEST_CASE("BCE weights respect the clip bounds") {
    Rng rng(5);
    std::uniform_real_distribution<double> up(1e-15, 1.0 - 1e-15), ua(0.01, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const double a = ua(rng), p = up(rng);
        const double wl = w1(LossVariant::bce, p, true, a);
        const double wu = w1(LossVariant::bce, p, false, a);
        CHECK(wl <= 1.0 + a * 10.0);
        CHECK(wl > 1.0 + a - 1e-12);
        CHECK(wu >= 1.0 - a * 10.0);
        CHECK(wu < 1.0 - a + 1e-12);
    }
}

TEST_CASE("unobserved BCE weight is negative exactly past the threshold") {
    Rng rng(6);
    std::uniform_real_distribution<double> up(1e-6, 1.0 - 1e-6), ua(0.01, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const double a = ua(rng), p = up(rng);
        const double r = std::min(1.0 / (1.0 - p), 10.0);
        const double wu = w1(LossVariant::bce, p, false, a);
        if (std::abs(r - 1.0 / a) < 1e-9) continue;
        CHECK((wu < 0.0) == (r > 1.0 / a));
        // before clipping the condition reads p > 1 - alpha
        if (1.0 / (1.0 - p) < 10.0 && std::abs(p - (1.0 - a)) > 1e-9) CHECK((wu < 0.0) == (p > 1.0 - a));
    }
}

TEST_CASE("both weight branches are non-increasing in p") {
    for (auto v : kVariants) {
        for (bool observed : {true, false}) {
            double prev = w1(v, 1e-6, observed);
            for (int k = 1; k < 2000; ++k) {
                const double p = 1e-6 + (1.0 - 2e-6) * k / 1999.0;
                const double w = w1(v, p, observed);
                CHECK(w <= prev + 1e-15);
                prev = w;
            }
        }
    }
}

TEST_CASE("exponential weights stay inside their closed ranges") {
    const double a = 0.7;
    for (double p : {1e-9, 0.3, 0.7, 1.0 - 1e-9}) {
        CHECK(w1(LossVariant::exponential, p, true, a) >= 1.0 + a / std::exp(1.0) - 1e-12);
        CHECK(w1(LossVariant::exponential, p, true, a) <= 1.0 + a);
        CHECK(w1(LossVariant::exponential, p, false, a) >= 1.0 - a * std::exp(1.0) - 1e-12);
        CHECK(w1(LossVariant::exponential, p, false, a) <= 1.0 - a);
    }
}

TEST_CASE("weights reject probabilities outside the open unit interval") {
    for (double p : {0.0, 1.0, -0.1, 1.5, std::nan("")}) CHECK_THROWS_AS(w1(LossVariant::bce, p, true), std::invalid_argument);
}

TEST_CASE("element-wise task loss examples") {
    auto cls = TaskKind::classification(2);
    auto idx0 = Tensor::constant({1, 1}, {0.0});
    CHECK(elementwise_loss_a(cls, idx0, Tensor::constant({1, 2}, {1.0, 0.0})).item() == 0.0);
    CHECK(elementwise_loss_a(cls, idx0, Tensor::constant({1, 2}, {0.5, 0.5})).item() ==
          doctest::Approx(0.693147).epsilon(1e-6));
    auto onehot = Tensor::constant({1, 2}, {1.0, 0.0});
    CHECK(elementwise_loss_a(cls, onehot, Tensor::constant({1, 2}, {0.5, 0.5})).item() ==
          doctest::Approx(std::log(2.0)).epsilon(1e-15));
    // probability floor keeps the loss finite
    CHECK(elementwise_loss_a(cls, idx0, Tensor::constant({1, 2}, {0.0, 1.0})).item() ==
          doctest::Approx(-std::log(1e-12)));

    auto reg = TaskKind::regression(1);
    CHECK(elementwise_loss_a(reg, Tensor::constant({1, 1}, {2.0}), Tensor::constant({1, 1}, {0.0})).item() == 4.0);
    auto reg2 = TaskKind::regression(2);
    CHECK(elementwise_loss_a(reg2, Tensor::constant({1, 2}, {2.0, 0.0}), Tensor::constant({1, 2}, {0.0, 0.0})).item() == 2.0);

    CHECK_THROWS_AS(elementwise_loss_a(cls, Tensor::constant({2, 1}, {0, 1}), Tensor::constant({1, 2}, {0.5, 0.5})),
                    ShapeError);
    CHECK_THROWS_AS(elementwise_loss_a(reg, Tensor::constant({1, 2}, {0, 1}), Tensor::constant({1, 1}, {0.5})), ShapeError);
}

TEST_CASE("element-wise task loss is non-negative") {
    auto f = build_main_model(TaskKind::classification(3), 2, {8}, 1);
    auto y = f.forward(random_matrix(40, 2, 2));
    Matrix labels(40, 1);
    for (std::size_t i = 0; i < 40; ++i) labels(i, 0) = static_cast<double>(i % 3);
    auto g = elementwise_loss_a(f.task(), Tensor::constant(labels), y);
    for (double v : g.values()) CHECK(v >= 0.0);
}

TEST_CASE("main loss examples") {
    auto g = Tensor::constant({2, 1}, {1.0, 1.0});
    std::vector<double> w{2.2, -5.0};
    CHECK(main_loss(g, w).item() == doctest::Approx(-1.4).epsilon(1e-15));
    auto g3 = Tensor::constant({3, 1}, {0.5, 1.5, 4.0});
    std::vector<double> ones(3, 1.0);
    CHECK(main_loss(g3, ones).item() == mean(g3).item());
    CHECK_THROWS_AS(main_loss(g3, w), ShapeError);
}

TEST_CASE("discriminator loss examples") {
    std::vector<std::uint8_t> m{1, 1, 0, 0};
    auto perfect = Tensor::constant({4, 1}, {1.0 - 1e-12, 1.0 - 1e-12, 1e-12, 1e-12});
    CHECK(std::abs(discriminator_loss(LossVariant::bce, perfect, m).item()) < 1e-9);

    auto half = Tensor::constant({4, 1}, {0.5, 0.5, 0.5, 0.5});
    CHECK(discriminator_loss(LossVariant::bce, half, m).item() == doctest::Approx(0.693147).epsilon(1e-6));

    std::vector<std::uint8_t> one{1};
    auto near_zero = Tensor::constant({1, 1}, {1e-300});
    CHECK(discriminator_loss(LossVariant::exponential, near_zero, one).item() == doctest::Approx(1.0).epsilon(1e-15));

    auto p = Tensor::constant({4, 1}, {0.2, 0.7, 0.4, 0.9});
    const double exp_ref = (std::exp(-0.2) + std::exp(-0.7) + std::exp(0.4) + std::exp(0.9)) / 4.0;
    CHECK(discriminator_loss(LossVariant::exponential, p, m).item() == doctest::Approx(exp_ref).epsilon(1e-14));
    const double log_ref = (std::log1p(std::exp(-0.2)) + std::log1p(std::exp(-0.7)) + std::log1p(std::exp(0.4)) +
                            std::log1p(std::exp(0.9))) / 4.0;
    CHECK(discriminator_loss(LossVariant::logistic, p, m).item() == doctest::Approx(log_ref).epsilon(1e-14));
    CHECK_THROWS(discriminator_loss(LossVariant::bce, Tensor::constant({1, 1}, {1.0}), one));
}

TEST_CASE("pseudo-label initialisation") {
    SUBCASE("classification draws classes uniformly and leaves observed labels alone") {
        auto ds = moons(0.5, 3, 2000);
        REQUIRE(ds.unlabeled.size() == 1000);
        for (std::uint64_t s = 0; s < 10; ++s) {
            auto st = init_pseudo_labels(ds, s);
            double ones = 0.0;
            for (std::size_t j : ds.unlabeled) ones += st.labels(j, 0);
            CHECK(std::abs(ones / 1000.0 - 0.5) <= 0.05);
            for (std::size_t i : ds.labeled) CHECK(st.labels(i, 0) == ds.y(i, 0));
            CHECK(st.mask == ds.mask);
        }
    }
    SUBCASE("nothing to fill when every label is observed") {
        auto ds = moons(0.0, 1);
        CHECK(init_pseudo_labels(ds, 0).labels == ds.y);
    }
    SUBCASE("regression with constant labels fills the mean") {
        auto ds = apply_missing(gen_tabular_regression(50, 2, 0), 0.5, 0);
        for (std::size_t i : ds.labeled) ds.y(i, 0) = 3.25;
        auto st = init_pseudo_labels(ds, 1);
        for (std::size_t j : ds.unlabeled) CHECK(st.labels(j, 0) == 3.25);
    }
    SUBCASE("regression noise is small relative to the label spread") {
        auto ds = apply_missing(gen_tabular_regression(2000, 3, 0), 0.5, 0);
        auto st = init_pseudo_labels(ds, 1);
        std::vector<double> yl, pu;
        for (std::size_t i : ds.labeled) yl.push_back(ds.y(i, 0));
        for (std::size_t j : ds.unlabeled) pu.push_back(st.labels(j, 0));
        CHECK(mean_of(pu) == doctest::Approx(mean_of(yl)).epsilon(0.05));
        CHECK(sample_std(pu) == doctest::Approx(0.1 * sample_std(yl)).epsilon(0.1));
    }
}

TEST_CASE("refresh with a perfect model yields perfect pseudo-labels and keeps observed labels") {
    // 1-D data split at 0; a linear softmax model with slopes -10/+10 classifies it exactly.
    SemiDataset ds;
    ds.task = TaskKind::classification(2);
    ds.x = Matrix(40, 1);
    ds.y = Matrix(40, 1);
    for (std::size_t i = 0; i < 40; ++i) {
        ds.x(i, 0) = (static_cast<double>(i) - 19.5) / 10.0;
        ds.y(i, 0) = i >= 20 ? 1.0 : 0.0;
    }
    ds.mask.assign(40, 1);
    ds.reindex();
    ds = apply_missing(ds, 0.5, 7);

    auto f = build_main_model(TaskKind::classification(2), 1, {}, 0);
    auto w = f.params().get("f.w0").mutable_values();
    w[0] = -10.0;
    w[1] = 10.0;

    auto st = init_pseudo_labels(ds, 2);
    auto next = refresh_pseudo_labels(f, st, ds);
    CHECK(next.round == 1);
    REQUIRE(next.accuracy_history.size() == 1);
    CHECK(next.accuracy_history[0] == 1.0);
    for (std::size_t i : ds.labeled) CHECK(next.labels(i, 0) == ds.y(i, 0));
    for (std::size_t j : ds.unlabeled) CHECK(next.labels(j, 0) == ds.y(j, 0));
}

TEST_CASE("observed labels survive any number of refreshes bit for bit") {
    auto ds = inject_label_noise(moons(0.7, 4), 0.2, 1);
    auto f = build_main_model(ds.task, 2, {8}, 3);
    auto st = init_pseudo_labels(ds, 0);
    for (int r = 0; r < 5; ++r) {
        st = refresh_pseudo_labels(f, st, ds);
        for (std::size_t i : ds.labeled) CHECK(st.labels(i, 0) == ds.y(i, 0));
    }
    CHECK(st.accuracy_history.size() == 5);
}

TEST_CASE("regression refresh copies raw predictions") {
    auto ds = apply_missing(gen_tabular_regression(30, 2, 1), 0.5, 1);
    auto f = build_main_model(ds.task, 2, {4}, 0);
    auto st = refresh_pseudo_labels(f, init_pseudo_labels(ds, 0), ds);
    auto pred = f.forward(Tensor::constant(ds.x)).to_matrix();
    for (std::size_t j : ds.unlabeled) CHECK(st.labels(j, 0) == pred(j, 0));
    for (std::size_t i : ds.labeled) CHECK(st.labels(i, 0) == ds.y(i, 0));
}

TEST_CASE("unit weights reduce the f-update to a supervised step") {
    auto x = random_matrix(16, 2, 1);
    Matrix labels(16, 1);
    for (std::size_t i = 0; i < 16; ++i) labels(i, 0) = static_cast<double>(i % 2);
    auto t = target_tensor(TaskKind::classification(2), labels);

    auto a = build_main_model(TaskKind::classification(2), 2, {8, 8}, 5);
    auto b = a.clone();
    std::vector<double> ones(16, 1.0);
    for (int step = 0; step < 3; ++step) {
        CHECK(main_model_step(a, x, t, ones, {.lr = 0.01}) == supervised_step(b, x, t, {.lr = 0.01}));
    }
    CHECK(flat_params(a.params()) == flat_params(b.params()));
}

TEST_CASE("a training epoch with unit weights matches supervised steps on the same batches") {
    auto ds = moons(0.5, 2, 150);
    auto st = init_pseudo_labels(ds, 1);
    GameConfig cfg;
    cfg.batch_size = 32;
    TrainHooks hooks;
    hooks.weights = [](std::span<const double> p, std::span<const std::uint8_t>) {
        return std::vector<double>(p.size(), 1.0);
    };

    auto f = build_main_model(ds.task, 2, {16}, 0);
    auto ref = f.clone();
    auto d = build_discriminator(2, 2, {}, 0);
    Rng rng(9), ref_rng(9);
    TrainingView view{ds.task, ds.x, st.labels, st.mask};
    train_epoch(f, d, view, cfg, rng, 1, &hooks);

    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), ref_rng);
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
        std::span<const std::size_t> idx(order.data() + s, std::min(cfg.batch_size, order.size() - s));
        supervised_step(ref, Tensor::constant(ds.x.select_rows(idx)),
                        target_tensor(ds.task, st.labels.select_rows(idx)), {.lr = cfg.lr_f});
    }
    CHECK(flat_params(f.params()) == flat_params(ref.params()));
}

TEST_CASE("BCE reweighting carries the adversarial coefficients") {
    // L_A = mean(w g); the extra term beyond mean(g) must be
    // α·mean(c g) with c = +min(1/p, H) on observed rows and -min(1/(1-p), H) otherwise.
    auto f = build_main_model(TaskKind::classification(2), 2, {6}, 4);
    auto x = random_matrix(4, 2, 8);
    auto t = target_tensor(f.task(), Matrix(4, 1));
    const std::vector<double> p{0.3, 0.05, 0.8, 0.97};
    const std::vector<std::uint8_t> m{1, 1, 0, 0};
    const double alpha = 0.6, h = 10.0;

    auto g = elementwise_loss_a(f.task(), t, f.forward(x));
    main_loss(g, soft_weights(LossVariant::bce, p, m, alpha, h)).backward();
    std::vector<double> got;
    for (const auto& e : f.params().entries()) got.insert(got.end(), e.param.grad().begin(), e.param.grad().end());
    f.params().clear_grad();

    // hand assembly from per-sample gradients
    const double c[4] = {std::min(1.0 / p[0], h), std::min(1.0 / p[1], h), -std::min(1.0 / (1.0 - p[2]), h),
                         -std::min(1.0 / (1.0 - p[3]), h)};
    std::vector<double> expected(got.size(), 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
        std::vector<std::size_t> one{i};
        auto gi = elementwise_loss_a(f.task(), target_tensor(f.task(), Matrix(1, 1)),
                                     f.forward(Tensor::constant(x.to_matrix().select_rows(one))));
        sum(gi).backward();
        std::size_t k = 0;
        for (const auto& e : f.params().entries()) {
            for (double v : e.param.grad()) expected[k++] += (1.0 + alpha * c[i]) * v / 4.0;
        }
        f.params().clear_grad();
    }
    for (std::size_t k = 0; k < got.size(); ++k) CHECK(got[k] == doctest::Approx(expected[k]).epsilon(1e-12));
}

TEST_CASE("gradients of both game losses match finite differences") {
    auto ds = moons(0.5, 1, 12);
    auto st = init_pseudo_labels(ds, 0);
    auto f = build_main_model(ds.task, 2, {10, 10}, 2);
    auto d = build_discriminator(2, 2, {{12}, {12}}, 3);
    REQUIRE(f.params().param_count() < 1000);
    REQUIRE(d.params().param_count() < 1000);
    auto x = Tensor::constant(ds.x);
    auto t = target_tensor(ds.task, st.labels);
    auto p0 = forward_discriminator(d, x, f.forward(x), elementwise_loss_a(ds.task, t, f.forward(x)));
    auto w = soft_weights(LossVariant::bce, p0, ds.mask, 0.6, 10.0);

    CHECK(finite_diff_check([&] { return main_loss(elementwise_loss_a(ds.task, t, f.forward(x)), w); }, f.params()) <
          1e-4);
    auto y_hat = f.forward(x).detach();
    auto g = elementwise_loss_a(ds.task, t, y_hat).detach();
    for (auto v : kVariants) {
        CHECK(finite_diff_check([&] { return discriminator_loss(v, d.forward(x, y_hat, g), ds.mask); }, d.params()) <
              1e-4);
    }
}

TEST_CASE("game config validation and JSON") {
    GameConfig cfg;
    cfg.alpha = 0.3;
    cfg.variant = LossVariant::logistic;
    cfg.epochs = 17;
    auto back = game_config_from_json(nlohmann::json::parse(to_json(cfg).dump()));
    CHECK(back.alpha == 0.3);
    CHECK(back.variant == LossVariant::logistic);
    CHECK(back.epochs == 17);
    CHECK(back.clip == 10.0);
    CHECK(back.refresh_interval == 10);

    CHECK_THROWS(game_config_from_json({{"alpha", 0.5}, {"beta", 1}}));
    CHECK_THROWS(game_config_from_json({{"alpha", 0.0}}));
    CHECK_THROWS(game_config_from_json({{"alpha", 1.5}}));
    CHECK_THROWS(game_config_from_json({{"clip", 1.0}}));
    CHECK_THROWS(game_config_from_json({{"variant", "hinge"}}));
    CHECK_THROWS(game_config_from_json({{"epochs", -1}}));
    CHECK(game_config_from_json({{"alpha", 1.0}}).alpha == 1.0);
}

TEST_CASE("zero epochs returns an untrained model and empty history") {
    auto ds = moons(0.5, 0);
    GameConfig cfg;
    cfg.epochs = 0;
    auto r = run_game(cfg, ds);
    CHECK(r.history.empty());
    auto fresh = build_run_model(ds.task, 2, {}, cfg.seed);
    CHECK(flat_params(r.model.params()) == flat_params(fresh.params()));
    CHECK(r.final_p.size() == ds.size());
}

TEST_CASE("runs are deterministic and histories are ordered without gaps") {
    auto ds = moons(0.7, 5);
    auto test = gen_two_moons(200, 0.2, 99);
    GameConfig cfg;
    cfg.epochs = 12;
    cfg.seed = 3;
    RunOptions opt;
    opt.test = &test;
    opt.timing = false;
    auto a = run_game(cfg, ds, opt);
    auto b = run_game(cfg, ds, opt);
    REQUIRE(a.history.size() == 12);
    for (std::size_t e = 0; e < 12; ++e) {
        CHECK(a.history[e].epoch == e + 1);
        CHECK(a.history[e].loss_a == b.history[e].loss_a);
        CHECK(a.history[e].loss_b == b.history[e].loss_b);
        CHECK(a.history[e].test_metric == b.history[e].test_metric);
        CHECK(a.history[e].auc_p_mask == b.history[e].auc_p_mask);
    }
    CHECK(a.final_p == b.final_p);
    CHECK(a.pseudo_history == b.pseudo_history);
    CHECK(a.pseudo_history.size() == 1);
    CHECK_FALSE(a.history[8].pseudo_acc.has_value());
    CHECK(a.history[9].pseudo_acc.has_value());
}

TEST_CASE("observer sees epoch 0 and every epoch with probabilities in (0, 1)") {
    auto ds = moons(0.5, 1, 100);
    GameConfig cfg;
    cfg.epochs = 3;
    std::vector<std::size_t> seen;
    RunOptions opt;
    opt.observer = [&](std::size_t e, std::span<const double> p) {
        seen.push_back(e);
        CHECK(p.size() == ds.size());
        for (double v : p) CHECK((v > 0.0 && v < 1.0));
    };
    run_game(cfg, ds, opt);
    CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("fully observed data still trains") {
    auto ds = moons(0.0, 2, 100);
    GameConfig cfg;
    cfg.epochs = 3;
    auto r = run_game(cfg, ds);
    CHECK(r.history.size() == 3);
    CHECK_FALSE(r.history.back().auc_p_mask.has_value());
    CHECK(r.pseudo_history.empty());
}

TEST_CASE("regression runs end to end") {
    auto ds = apply_missing(gen_tabular_regression(100, 3, 0), 0.3, 0);
    GameConfig cfg;
    cfg.epochs = 10;
    auto r = run_game(cfg, ds);
    CHECK(r.history.size() == 10);
    CHECK(r.pseudo_history.size() == 1);
    CHECK(std::isfinite(r.history.back().loss_a));
}

TEST_CASE("non-finite losses abort with the epoch and batch") {
    auto ds = moons(0.5, 1, 100);
    GameConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 25;
    int calls = 0;
    TrainHooks hooks;
    hooks.weights = [&](std::span<const double> p, std::span<const std::uint8_t>) {
        ++calls;
        return std::vector<double>(p.size(), calls == 6 ? std::nan("") : 1.0);
    };
    RunOptions opt;
    opt.hooks = &hooks;
    try {
        run_game(cfg, ds, opt);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.epoch() == 2);
        CHECK(e.batch() == 1);
        CHECK(std::string(e.what()).find("epoch 2") != std::string::npos);
    }
}

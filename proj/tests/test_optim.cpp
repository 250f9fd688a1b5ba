#include "doctest.h"

#include "flexssl/optim.hpp"

#include <cmath>

using namespace flexssl;

TEST_CASE("first Adam step moves by about lr") {
    ParamStore ps;
    auto x = ps.add("x", Tensor::parameter({1, 1}, {1.0}));
    sum(scale(x, 4.0)).backward();  // grad = 4
    ps.adam_step({.lr = 0.1});
    CHECK(x.values()[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(ps.step_count() == 1);
    CHECK_FALSE(x.has_grad());
}

TEST_CASE("Adam update matches an independent transcription") {
    ParamStore ps;
    auto x = ps.add("x", Tensor::parameter({1, 2}, {0.3, -0.7}));
    const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double ref[2] = {0.3, -0.7}, m[2] = {0, 0}, v[2] = {0, 0};
    for (int t = 1; t <= 5; ++t) {
        sum(square(x)).backward();
        ps.adam_step({.lr = lr});
        for (int i = 0; i < 2; ++i) {
            const double g = 2.0 * ref[i];
            m[i] = b1 * m[i] + (1 - b1) * g;
            v[i] = b2 * v[i] + (1 - b2) * g * g;
            const double mh = m[i] / (1 - std::pow(b1, t));
            const double vh = v[i] / (1 - std::pow(b2, t));
            ref[i] -= lr * mh / (std::sqrt(vh) + eps);
        }
        CHECK(x.values()[0] == doctest::Approx(ref[0]).epsilon(1e-14));
        CHECK(x.values()[1] == doctest::Approx(ref[1]).epsilon(1e-14));
    }
}

TEST_CASE("zero gradient leaves parameters unchanged but counts the step") {
    ParamStore ps;
    auto x = ps.add("x", Tensor::parameter({1, 3}, {1, 2, 3}));
    x.zero_grad();
    ps.adam_step({});
    CHECK(x.values()[0] == 1.0);
    CHECK(x.values()[2] == 3.0);
    CHECK(ps.step_count() == 1);
}

TEST_CASE("two steps on x squared strictly shrink |x|") {
    ParamStore ps;
    auto x = ps.add("x", Tensor::parameter({1, 1}, {2.0}));
    double prev = 2.0;
    for (int i = 0; i < 2; ++i) {
        sum(square(x)).backward();
        ps.adam_step({.lr = 0.1});
        CHECK(std::abs(x.values()[0]) < prev);
        prev = std::abs(x.values()[0]);
    }
}

TEST_CASE("missing gradient is rejected") {
    ParamStore ps;
    auto a = ps.add("a", Tensor::parameter({1, 1}, {1.0}));
    ps.add("b", Tensor::parameter({1, 1}, {1.0}));
    sum(a).backward();
    CHECK_THROWS_AS(ps.adam_step({}), std::logic_error);
}

TEST_CASE("invalid hyperparameters are rejected") {
    ParamStore ps;
    auto a = ps.add("a", Tensor::parameter({1, 1}, {1.0}));
    a.zero_grad();
    CHECK_THROWS(ps.adam_step({.lr = 0.0}));
    CHECK_THROWS(ps.adam_step({.beta1 = 1.0}));
    CHECK_THROWS(ps.adam_step({.beta2 = -0.1}));
    CHECK_THROWS(ps.adam_step({.eps = 0.0}));
}

TEST_CASE("store rejects duplicate names and constants") {
    ParamStore ps;
    ps.add("w", Tensor::parameter({1}, {0.0}));
    CHECK_THROWS(ps.add("w", Tensor::parameter({1}, {0.0})));
    CHECK_THROWS(ps.add("c", Tensor::constant({1}, {0.0})));
    CHECK_THROWS(ps.get("missing"));
}

TEST_CASE("clone is deep") {
    ParamStore ps;
    auto a = ps.add("a", Tensor::parameter({1, 2}, {1, 2}));
    a.zero_grad();
    ps.adam_step({});
    ParamStore copy = ps.clone();
    CHECK(copy.step_count() == 1);
    copy.get("a").mutable_values()[0] = 42.0;
    CHECK(a.values()[0] == 1.0);
    CHECK(copy.get("a").id() != a.id());
}

// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "memxbar/error.hpp"
#include "memxbar/netmodel.hpp"
#include "memxbar/rng.hpp"

using namespace memxbar;
using namespace memxbar::netmodel;

namespace {

MlpParams random_params(Rng& rng, double scale)
{
    MlpParams p;
    for (auto& row : p.w_hidden) {
        for (auto& w : row) {
            w = uniform(rng, -scale, scale);
        }
    }
    for (auto& row : p.w_out) {
        for (auto& w : row) {
            w = uniform(rng, -scale, scale);
        }
    }
    for (auto& b : p.b_hidden) {
        b = uniform(rng, -scale, scale);
    }
    for (auto& b : p.b_out) {
        b = uniform(rng, -scale, scale);
    }
    return p;
}

Input random_input(Rng& rng)
{
    Input x;
    for (auto& v : x) {
        v = uniform(rng, 0.0, 1.0);
    }
    return x;
}

Output naive_forward(const MlpParams& p, const Input& x)
{
    Hidden h{};
    for (std::size_t j = 0; j < kHidden; ++j) {
        double z = p.b_hidden[j];
        for (std::size_t i = 0; i < kInputs; ++i) {
            z += p.w_hidden[i][j] * x[i];
        }
        h[j] = std::min(1.0, std::max(-1.0, z));
    }
    Output y{};
    for (std::size_t r = 0; r < kOutputs; ++r) {
        double z = p.b_out[r];
        for (std::size_t j = 0; j < kHidden; ++j) {
            z += p.w_out[j][r] * h[j];
        }
        y[r] = std::min(1.0, std::max(-1.0, z));
    }
    return y;
}

Output target(Label l)
{
    Output y{-1.0, -1.0, -1.0, -1.0};
    if (l != Label::Sr) {
        y[static_cast<std::size_t>(l)] = 1.0;
    }
    return y;
}

}  // namespace

TEST_CASE("zero network outputs zero")
{
    const MlpParams p;
    Rng rng{1};
    for (double v : forward(p, random_input(rng))) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("single path propagates and saturates")
{
    MlpParams p;
    p.w_hidden[0][0] = 1.0;
    p.w_out[0][0] = 1.0;
    Input x{};
    x[0] = 1.0;
    CHECK(forward(p, x)[0] == 1.0);
    x[0] = 0.4;
    CHECK(forward(p, x)[0] == doctest::Approx(0.4));
    p.w_hidden[0][0] = 5.0;
    CHECK(forward(p, x)[0] == 1.0);
}

TEST_CASE("forward pass matches a naive double loop")
{
    Rng rng{5};
    for (int i = 0; i < 200; ++i) {
        const auto p = random_params(rng, 2.0);
        const auto x = random_input(rng);
        const auto a = forward(p, x);
        const auto b = naive_forward(p, x);
        for (std::size_t r = 0; r < kOutputs; ++r) {
            CHECK(std::abs(a[r] - b[r]) <= 1e-12);
        }
    }
}

TEST_CASE("activation derivative uses the interior slope at the kinks")
{
    const Activation a;
    CHECK(a.apply(2.0) == 1.0);
    CHECK(a.apply(-2.0) == -1.0);
    CHECK(a.derivative(0.3) == 1.0);
    CHECK(a.derivative(1.0) == 1.0);
    CHECK(a.derivative(-1.0) == 1.0);
    CHECK(a.derivative(1.5) == 0.0);
}

TEST_CASE("mean squared error")
{
    const std::vector<Output> y{{1, -1, -1, -1}};
    const std::vector<Output> zero{{0, 0, 0, 0}};
    CHECK(mse(y, y) == 0.0);
    CHECK(mse(y, zero) == doctest::Approx(4.0));

    Rng rng{9};
    std::vector<Output> a(50);
    std::vector<Output> b(50);
    double oracle = 0.0;
    for (std::size_t h = 0; h < a.size(); ++h) {
        for (std::size_t r = 0; r < kOutputs; ++r) {
            a[h][r] = uniform(rng, -1, 1);
            b[h][r] = uniform(rng, -1, 1);
            oracle += (a[h][r] - b[h][r]) * (a[h][r] - b[h][r]);
        }
    }
    CHECK(mse(a, b) == doctest::Approx(oracle / 50.0).epsilon(1e-12));
    CHECK_THROWS_AS(mse(a, std::vector<Output>(3)), Error);
}

TEST_CASE("error probability")
{
    std::vector<Label> t(2000, Label::S1);
    std::vector<Label> p(t);
    CHECK(p_err(p, t) == 0.0);
    for (int i = 0; i < 100; ++i) {
        p[static_cast<std::size_t>(i)] = Label::Sr;
    }
    CHECK(p_err(p, t) == doctest::Approx(5.0));
    std::fill(p.begin(), p.end(), Label::S2);
    CHECK(p_err(p, t) == doctest::Approx(100.0));
}

TEST_CASE("classification rule")
{
    CHECK(classify({1, -1, -1, -1}) == Label::S1);
    CHECK(classify({-1, -1, -1, -1}) == Label::Sr);
    CHECK(classify({0.2, 0.2, -1, -1}) == Label::S1);
    CHECK(classify({0, 0, 0, 0}) == Label::Sr);
    for (auto l : {Label::S1, Label::S2, Label::S3, Label::S4, Label::Sr}) {
        CHECK(classify(target(l)) == l);
        CHECK(label_from_string(to_string(l)) == l);
    }
    Rng rng{3};
    for (int i = 0; i < 500; ++i) {
        Output y;
        for (auto& v : y) {
            v = uniform(rng, -1, 1);
        }
        if (*std::max_element(y.begin(), y.end()) <= 0.0) {
            continue;
        }
        const double a = uniform(rng, 0.01, 10.0);
        Output scaled = y;
        for (auto& v : scaled) {
            v *= a;
        }
        CHECK(classify(scaled) == classify(y));
    }
}

TEST_CASE("analytic gradient matches central differences")
{
    Rng rng{77};
    TrainingSet data;
    for (int i = 0; i < 12; ++i) {
        data.x.push_back(random_input(rng));
        data.y.push_back(target(static_cast<Label>(i % 5)));
    }
    int points = 0;
    while (points < 20) {
        const auto p = random_params(rng, 0.05);
        MlpParams::Vector g{};
        loss_and_gradient(p, data, g);
        const auto base = p.flatten();
        const double h = 1e-5;
        for (std::size_t k = 0; k < base.size(); ++k) {
            auto plus = base;
            auto minus = base;
            plus[k] += h;
            minus[k] -= h;
            MlpParams pp = p;
            MlpParams pm = p;
            pp.assign(plus);
            pm.assign(minus);
            const double fd = (loss(pp, data) - loss(pm, data)) / (2.0 * h);
            CHECK(std::abs(g[k] - fd) <= 1e-4 * std::max(std::abs(fd), std::abs(g[k])) + 1e-9);
        }
        ++points;
    }
}

TEST_CASE("flat parameter layout round trip")
{
    Rng rng{2};
    const auto p = random_params(rng, 1.0);
    MlpParams q;
    q.assign(p.flatten());
    CHECK(q.flatten() == p.flatten());
    CHECK(MlpParams::kParamCount == 172);
}

TEST_CASE("training fits a small separable set")
{
    Rng rng{6};
    TrainingSet data;
    for (std::size_t c = 0; c < 4; ++c) {
        for (int k = 0; k < 5; ++k) {
            Input x{};
            x[4 * c] = 0.9;
            x[4 * c + 1] = 0.1 * k;
            data.x.push_back(x);
            data.y.push_back(target(static_cast<Label>(c)));
        }
    }
    TrainConfig cfg;
    cfg.max_epochs = 3000;
    const auto r = train_discrete(init_params(1, 0.5), data, cfg);
    CHECK(r.converged);
    CHECK(r.curve.back() <= 1e-4);
    CHECK(loss(r.params, data) <= 1e-4);
}

TEST_CASE("stuck weights stay frozen")
{
    Rng rng{6};
    TrainingSet data;
    for (int i = 0; i < 30; ++i) {
        data.x.push_back(random_input(rng));
        data.y.push_back(target(static_cast<Label>(i % 5)));
    }
    TrainConfig cfg;
    cfg.max_epochs = 50;
    cfg.stuck = {{Layer::Hidden, 2, 3, {0.5}}, {Layer::Output, 1, 2, {-1.0, 0.0, 1.0}}};
    const auto r = train_discrete(init_params(3, 0.5), data, cfg);
    CHECK(r.params.w_hidden[2][3] == 0.5);
    const double w = r.params.w_out[1][2];
    CHECK((w == -1.0 || w == 0.0 || w == 1.0));
}

TEST_CASE("projected training keeps every weight on the state list")
{
    Rng rng{8};
    TrainingSet data;
    for (int i = 0; i < 40; ++i) {
        data.x.push_back(random_input(rng));
        data.y.push_back(target(static_cast<Label>(i % 5)));
    }
    TrainConfig cfg;
    cfg.max_epochs = 60;
    cfg.discrete_states = std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0};
    const auto r = train_discrete(init_params(2, 0.5), data, cfg);
    for (const auto& row : r.params.w_hidden) {
        for (double w : row) {
            CHECK(std::find(cfg.discrete_states->begin(), cfg.discrete_states->end(), w) !=
                  cfg.discrete_states->end());
        }
    }
    for (const auto& row : r.params.w_out) {
        for (double w : row) {
            CHECK(std::find(cfg.discrete_states->begin(), cfg.discrete_states->end(), w) !=
                  cfg.discrete_states->end());
        }
    }
    for (double m : r.curve) {
        CHECK(std::isfinite(m));
    }
}

TEST_CASE("box limit and tolerance-aware objective")
{
    Rng rng{10};
    TrainingSet data;
    for (int i = 0; i < 40; ++i) {
        data.x.push_back(random_input(rng));
        data.y.push_back(target(static_cast<Label>(i % 5)));
    }
    TrainConfig cfg;
    cfg.max_epochs = 80;
    cfg.weight_limit = 0.7;
    WeightNoise noise;
    noise.sigma = 0.1;
    noise.offset = 1.0 / 3.0;
    noise.draws = 1;
    cfg.noise = noise;
    const auto a = train_discrete(init_params(4, 0.5), data, cfg);
    const auto b = train_discrete(init_params(4, 0.5), data, cfg);
    CHECK(a.params.max_abs_weight() <= 0.7 + 1e-12);
    CHECK(a.params.flatten() == b.params.flatten());
    CHECK(a.curve == b.curve);
    for (double m : a.curve) {
        CHECK(std::isfinite(m));
    }
}

TEST_CASE("invalid training configurations")
{
    TrainConfig cfg;
    cfg.max_epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    TrainingSet empty;
    CHECK_THROWS_AS(train_discrete(MlpParams{}, empty, TrainConfig{}), Error);
}

TEST_CASE("predictions are deterministic")
{
    Rng rng{12};
    const auto p = random_params(rng, 1.0);
    std::vector<Input> xs;
    for (int i = 0; i < 100; ++i) {
        xs.push_back(random_input(rng));
    }
    CHECK(predict(p, xs) == predict(p, xs));
}

// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "memxbar/dataset.hpp"
#include "memxbar/error.hpp"

using namespace memxbar;
using namespace memxbar::dataset;

TEST_CASE("default profile is a latin square inside the window")
{
    const auto p = default_profile();
    CHECK_NOTHROW(p.validate());
    for (std::size_t s = 0; s < kSites; ++s) {
        CHECK(p.means[s][s][0] == doctest::Approx(3.0));
        for (std::size_t c = 0; c < kChannels; ++c) {
            for (std::size_t k = 1; k < kSpikes; ++k) {
                const double gap = p.means[s][c][k] - p.means[s][c][k - 1];
                CHECK(gap >= 5.0 - 1e-12);
                CHECK(gap <= 6.0 + 1e-12);
            }
            CHECK(p.means[s][c][kSpikes - 1] <= 45.0 + 1e-12);
        }
    }
    StimulusProfile bad = p;
    bad.deviation_bound = 1.5;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("normalisation and quantisation")
{
    Times t{};
    t.fill(50.0);
    t[1] = 0.0;
    t[2] = 6.17;
    const auto x = normalize_quantize(t, 50.0);
    CHECK(x[0] == doctest::Approx(1.0));
    CHECK(x[1] == 0.0);
    CHECK(x[2] == doctest::Approx(0.1225));
    t[3] = 58.5;
    CHECK_THROWS_AS(normalize_quantize(t, 50.0), Error);
    CHECK(quantize_level(0.00125) == doctest::Approx(0.0025));
    for (int i = 0; i <= 400; ++i) {
        const double q = quantize_level(i * 0.0025 + 0.0007);
        CHECK(q == doctest::Approx(i * 0.0025));
    }
}

TEST_CASE("late spikes clamp to the end of the window")
{
    StimulusProfile p = default_profile();
    for (auto& site : p.means) {
        for (auto& ch : site) {
            ch.fill(45.0);
        }
    }
    const auto raw = synthesize_stimulus_raw(p, 200, 4);
    bool clamped = false;
    for (const auto& r : raw) {
        for (double t : r.times) {
            CHECK(t <= 50.0);
            clamped = clamped || t == 50.0;
        }
    }
    CHECK(clamped);
    for (const auto& s : synthesize_stimulus_patterns(p, 50, 4)) {
        for (double v : s.values) {
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("stimulus jitter stays inside the deviation bound")
{
    const auto p = default_profile();
    const auto raw = synthesize_stimulus_raw(p, 1000, 11);
    REQUIRE(raw.size() == 4000);
    for (const auto& r : raw) {
        const auto s = static_cast<std::size_t>(r.label);
        for (std::size_t c = 0; c < kChannels; ++c) {
            const auto& m = p.means[s][c];
            const double lo = 0.7 * m.front();
            const double hi = std::min(p.window, 1.3 * m.back());
            for (std::size_t k = 0; k < kSpikes; ++k) {
                const double t = r.times[c * kSpikes + k];
                CHECK(t >= lo - 1e-9);
                CHECK(t <= hi + 1e-9);
                if (k > 0) {
                    CHECK(t >= r.times[c * kSpikes + k - 1]);
                }
            }
        }
    }
    const auto counts = count_labels(synthesize_stimulus_patterns(p, 1000, 11));
    for (std::size_t s = 0; s < kSites; ++s) {
        CHECK(counts[s] == 1000);
    }
}

TEST_CASE("extraneous arrivals are uniform over the window")
{
    const auto pats = synthesize_extraneous(4000, 50.0, 3);
    std::vector<double> all;
    for (const auto& s : pats) {
        CHECK(s.label == Label::Sr);
        for (std::size_t c = 0; c < kChannels; ++c) {
            for (std::size_t k = 0; k < kSpikes; ++k) {
                const double v = s.values[c * kSpikes + k];
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                if (k > 0) {
                    CHECK(v >= s.values[c * kSpikes + k - 1]);
                }
                all.push_back(v);
            }
        }
    }
    REQUIRE(all.size() == 64000);
    std::sort(all.begin(), all.end());
    double d = 0.0;
    const double n = static_cast<double>(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        d = std::max({d, std::abs((i + 1) / n - all[i]), std::abs(i / n - all[i])});
    }
    CHECK(d < 0.02);
}

TEST_CASE("split reproduces the class counts and partitions the patterns")
{
    const auto split = build_default_split(default_profile(), 1);
    CHECK(split.train.size() == 6000);
    CHECK(split.test.size() == 2000);
    CHECK(split.train_counts == kDefaultTrainCounts);
    CHECK(split.test_counts == kDefaultTestCounts);
    CHECK(count_labels(split.train) == kDefaultTrainCounts);
    CHECK(count_labels(split.test) == kDefaultTestCounts);

    auto patterns = synthesize_stimulus_patterns(default_profile(), 1000, 1);
    const auto extra = synthesize_extraneous(4000, 50.0, 1);
    patterns.insert(patterns.end(), extra.begin(), extra.end());
    auto key = [](const SpikePattern& s) {
        std::vector<double> v(s.values.begin(), s.values.end());
        v.push_back(static_cast<double>(s.label));
        return v;
    };
    std::vector<std::vector<double>> a;
    std::vector<std::vector<double>> b;
    for (const auto& s : patterns) {
        a.push_back(key(s));
    }
    for (const auto& s : split.train) {
        b.push_back(key(s));
    }
    for (const auto& s : split.test) {
        b.push_back(key(s));
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);

    patterns.pop_back();
    CHECK_THROWS_AS(make_split(patterns, 1), Error);
    try {
        make_split(patterns, 1);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::CountMismatch);
    }
}

TEST_CASE("target vectors classify back to their label")
{
    for (auto l : {Label::S1, Label::S2, Label::S3, Label::S4, Label::Sr}) {
        const auto y = target_vector(l);
        CHECK(netmodel::classify(y) == l);
        int positive = 0;
        for (double v : y) {
            CHECK(std::abs(v) == 1.0);
            positive += v > 0 ? 1 : 0;
        }
        CHECK(positive == (l == Label::Sr ? 0 : 1));
    }
}

TEST_CASE("generation is deterministic per seed")
{
    const auto a = build_default_split(default_profile(), 7);
    const auto b = build_default_split(default_profile(), 7);
    const auto c = build_default_split(default_profile(), 8);
    CHECK(to_csv(a.train) == to_csv(b.train));
    CHECK(to_csv(a.test) == to_csv(b.test));
    CHECK(to_csv(a.train) != to_csv(c.train));
}

TEST_CASE("csv round trip")
{
    const auto split = build_default_split(default_profile(), 2);
    const auto back = from_csv(to_csv(split.test));
    REQUIRE(back.size() == split.test.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].label == split.test[i].label);
        CHECK(back[i].values == split.test[i].values);
    }
    const auto set = to_training_set(split.test);
    CHECK(set.x.size() == set.y.size());
    CHECK(labels_of(split.test).size() == inputs_of(split.test).size());
    CHECK_THROWS_AS(from_csv("x0,label\n0.1,S1\n"), Error);
}

// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "memxbar/device.hpp"
#include "memxbar/error.hpp"

using namespace memxbar;
using namespace memxbar::device;

namespace {

DeviceParams quiet()
{
    DeviceParams p;
    p.response_noise_sigma = 0.0;
    return p;
}

double sample_std(const std::vector<double>& v)
{
    double mean = 0.0;
    for (double x : v) {
        mean += x;
    }
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) {
        ss += (x - mean) * (x - mean);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST_CASE("default parameters are valid and reject broken invariants")
{
    DeviceParams p;
    CHECK_NOTHROW(p.validate());
    p.v_read = 1.5;
    CHECK_THROWS_AS(p.validate(), Error);
    p = DeviceParams{};
    p.ramp_range = {1.0, 3.0};
    CHECK_THROWS_AS(p.validate(), Error);
    p = DeviceParams{};
    p.r_lrs_nominal = 400e3;
    CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("read current follows Ohm's law")
{
    const DeviceParams p;
    CHECK(read_current({100e3, {}}, 0.5, p) == doctest::Approx(5e-6));
    CHECK(read_current({37e3, {}}, 0.0, p) == 0.0);
    // 1.0 / 12.2e3 = 8.19672e-5 A
    CHECK(read_current({12.2e3, {}}, 1.0, p) == doctest::Approx(81.97e-6).epsilon(1e-4));
    CHECK_THROWS_AS(read_current({12.2e3, {}}, 1.5, p), Error);
}

TEST_CASE("read current is linear in the read voltage")
{
    const DeviceParams p;
    const MemristorCell c{47e3, {}};
    for (double a : {-2.0, -0.5, 0.25, 1.0, 2.5}) {
        CHECK(read_current(c, a * 0.4, p) == doctest::Approx(a * read_current(c, 0.4, p)).epsilon(1e-14));
    }
}

TEST_CASE("SET drives the device to LRS")
{
    Rng rng{1};
    const auto p = quiet();
    CHECK(set_pulse({60e3, {}}, p, rng).resistance == 10e3);
    CHECK(set_pulse(MemristorCell::stuck_at(42e3), p, rng).resistance == 42e3);
}

TEST_CASE("SET response spread follows the noise parameter")
{
    DeviceParams p;
    p.response_noise_sigma = 0.05;
    Rng rng{7};
    std::vector<double> r;
    for (int i = 0; i < 1000; ++i) {
        r.push_back(set_pulse({100e3, {}}, p, rng).resistance);
    }
    const double s = sample_std(r) / p.r_lrs_nominal;
    CHECK(s >= 0.03);
    CHECK(s <= 0.07);
}

TEST_CASE("RESET response is monotone between the ramp bounds")
{
    const auto p = quiet();
    Rng rng{3};
    CHECK(reset_pulse({10e3, {}}, 1.5, p, rng).resistance == doctest::Approx(10e3));
    CHECK(reset_pulse({10e3, {}}, 3.0, p, rng).resistance == doctest::Approx(300e3));
    double prev = 0.0;
    for (int k = 0; k <= 1000; ++k) {
        const double g = reset_response(1.5 + 1.5 * k / 1000.0, p);
        CHECK(g > prev);
        prev = g;
    }
    CHECK_THROWS_AS(reset_response(3.2, p), Error);
    CHECK_THROWS_AS(reset_response(1.2, p), Error);
}

TEST_CASE("write-verify lands inside the tolerance band")
{
    const DeviceParams p;
    Rng rng{11};
    MemristorCell c{300e3, {}};
    const auto log = program_to(c, 35e3, p, rng, {});
    CHECK(log.success);
    CHECK(c.resistance >= 29.75e3);
    CHECK(c.resistance <= 40.25e3);
    CHECK(log.attempts <= p.max_program_iterations);
}

TEST_CASE("stuck device already at the target needs no pulses")
{
    const DeviceParams p;
    Rng rng{1};
    auto c = MemristorCell::stuck_at(42e3);
    const auto log = program_to(c, 42e3, p, rng, {});
    CHECK(log.success);
    CHECK(log.pulses == 0);
    CHECK(log.attempts == 0);
}

TEST_CASE("stuck device far from the target is reported")
{
    const DeviceParams p;
    Rng rng{1};
    auto c = MemristorCell::stuck_at(200e3);
    try {
        program_to(c, 42e3, p, rng, {});
        FAIL("expected StuckDevice");
    } catch (const ProgrammingError& e) {
        CHECK(e.code() == ErrorCode::StuckDevice);
    }
}

TEST_CASE("eight states between 10 and 60 kOhm, twenty repeats each")
{
    const DeviceParams p;
    for (int t = 0; t < 8; ++t) {
        const double target = 10e3 + 50e3 * t / 7.0;
        for (int rep = 0; rep < 20; ++rep) {
            Rng rng = substream(99, static_cast<std::uint64_t>(t * 20 + rep));
            MemristorCell c{300e3, {}};
            const auto log = program_to(c, target, p, rng, {});
            CHECK(log.success);
            CHECK(std::abs(c.resistance - target) <= 0.15 * target);
        }
    }
}

TEST_CASE("noise-free programming needs exactly one SET cycle")
{
    const auto p = quiet();
    Rng rng{5};
    for (double target = 10e3; target <= 300e3; target += 1e3) {
        MemristorCell c{300e3, {}};
        const auto log = program_to(c, target, p, rng, {});
        REQUIRE(log.success);
        CHECK(log.attempts == 1);
    }
}

TEST_CASE("programming error bound over many runs")
{
    const DeviceParams p;
    int within = 0;
    for (int i = 0; i < 1000; ++i) {
        Rng rng = substream(2024, static_cast<std::uint64_t>(i));
        MemristorCell c{300e3, {}};
        const auto log = program_to(c, 120e3, p, rng, {});
        within += log.success && std::abs(c.resistance - 120e3) <= 0.15 * 120e3 ? 1 : 0;
    }
    CHECK(within == 1000);
}

TEST_CASE("iteration cap is enforced")
{
    DeviceParams p;
    p.max_program_iterations = 2;
    p.program_tolerance = 0.001;
    p.response_noise_sigma = 0.3;
    int failures = 0;
    for (int i = 0; i < 50; ++i) {
        Rng rng = substream(5, static_cast<std::uint64_t>(i));
        MemristorCell c{300e3, {}};
        try {
            const auto log = program_to(c, 150e3, p, rng, {});
            CHECK(log.attempts <= 2);
        } catch (const ProgrammingError& e) {
            CHECK(e.code() == ErrorCode::ProgrammingFailed);
            CHECK(e.log().attempts == 2);
            ++failures;
        }
    }
    CHECK(failures > 0);
}

TEST_CASE("targets outside the device range are rejected")
{
    const DeviceParams p;
    Rng rng{1};
    MemristorCell c{300e3, {}};
    CHECK_THROWS_AS(program_to(c, 5e3, p, rng, {}), Error);
    CHECK_THROWS_AS(program_to(c, 400e3, p, rng, {}), Error);
}

TEST_CASE("program log rows")
{
    ProgramLog log{35e3, 1, 12, 36e3, true};
    CHECK(program_log_csv_header() == "target_ohm,final_ohm,attempts,pulses,success");
    CHECK(program_log_csv_row(log) == "35000.000000,36000.000000,1,12,1");
}

// SPDX-License-Identifier: Apache-2.0
#include "memxbar/device.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace memxbar::device {

namespace {

constexpr double kAmplitudeEps = 1e-12;

double lognormal_factor(double sigma, Rng& rng)
{
    if (sigma <= 0.0) {
        return 1.0;
    }
    return std::exp(sigma * standard_normal(rng));
}

void settle_stuck(MemristorCell& cell)
{
    if (cell.stuck) {
        cell.resistance = *cell.stuck;
    }
}

}  // namespace

void DeviceParams::validate() const
{
    auto fail = [](const char* what) { throw Error(ErrorCode::InvalidArgument, what); };
    if (!(r_lrs_nominal > 0.0) || !(r_lrs_nominal < r_hrs_nominal)) {
        fail("device: require 0 < r_lrs_nominal < r_hrs_nominal");
    }
    if (!(v_threshold > 0.0)) {
        fail("device: v_threshold must be positive");
    }
    if (ramp_range[0] < v_threshold || ramp_range[1] > 3.0 || ramp_range[0] >= ramp_range[1]) {
        fail("device: ramp_range must satisfy v_threshold <= lower < upper <= 3 V");
    }
    if (!(ramp_step > 0.0)) {
        fail("device: ramp_step must be positive");
    }
    if (!(program_tolerance > 0.0 && program_tolerance < 1.0)) {
        fail("device: program_tolerance must lie in (0, 1)");
    }
    if (response_noise_sigma < 0.0 || 3.0 * response_noise_sigma >= 1.0) {
        fail("device: response_noise_sigma must lie in [0, 1/3)");
    }
    if (std::abs(v_read) >= v_threshold) {
        fail("device: v_read must stay below v_threshold");
    }
    if (max_program_iterations < 1) {
        fail("device: max_program_iterations must be >= 1");
    }
    if (!(ramp_gamma > 0.0)) {
        fail("device: ramp_gamma must be positive");
    }
}

double DeviceParams::clamp_resistance(double r) const noexcept
{
    return std::clamp(r, r_floor(), r_hrs_nominal);
}

double read_current(const MemristorCell& cell, double v, const DeviceParams& params)
{
    if (std::abs(v) >= params.v_threshold) {
        throw Error(ErrorCode::AboveThreshold, "read amplitude reaches the switching threshold");
    }
    return v / cell.resistance;
}

double reset_response(double amplitude, const DeviceParams& params)
{
    const auto [a_min, a_max] = params.ramp_range;
    if (amplitude < a_min - kAmplitudeEps || amplitude > a_max + kAmplitudeEps) {
        throw Error(ErrorCode::AmplitudeOutOfRange, "RESET amplitude outside the ramp range");
    }
    const double t = std::clamp((amplitude - a_min) / (a_max - a_min), 0.0, 1.0);
    return params.r_lrs_nominal +
           (params.r_hrs_nominal - params.r_lrs_nominal) * std::pow(t, params.ramp_gamma);
}

MemristorCell set_pulse(MemristorCell cell, const DeviceParams& params, Rng& rng)
{
    if (cell.stuck) {
        settle_stuck(cell);
        return cell;
    }
    const double factor = lognormal_factor(params.response_noise_sigma, rng);
    cell.resistance = params.clamp_resistance(params.r_lrs_nominal * factor);
    return cell;
}

MemristorCell reset_pulse(MemristorCell cell, double amplitude, const DeviceParams& params, Rng& rng)
{
    const double nominal = reset_response(amplitude, params);
    if (cell.stuck) {
        settle_stuck(cell);
        return cell;
    }
    const double factor = lognormal_factor(params.response_noise_sigma, rng);
    cell.resistance = params.clamp_resistance(nominal * factor);
    return cell;
}

ProgramLog program_to(MemristorCell& cell, double target, const DeviceParams& params, Rng& rng,
                      const ProgramHooks& hooks)
{
    if (target < params.r_lrs_nominal * (1.0 - 1e-12) ||
        target > params.r_hrs_nominal * (1.0 + 1e-12)) {
        throw Error(ErrorCode::InvalidArgument, "program target outside the device range");
    }

    auto measure = [&](const MemristorCell& c) {
        if (hooks.on_pulse) {
            hooks.on_pulse(PulseKind::Read, params.v_read);
        }
        if (hooks.measure) {
            return hooks.measure(c);
        }
        return params.v_read / read_current(c, params.v_read, params);
    };
    const double band = params.program_tolerance * target;
    auto accepted = [&](double r_measured) {
        const double slack = hooks.uncertainty ? hooks.uncertainty(r_measured) : 0.0;
        return std::abs(r_measured - target) <= band - slack;
    };

    ProgramLog log;
    log.target = target;

    if (cell.stuck) {
        const double r = measure(cell);
        log.final_resistance = cell.resistance;
        if (!accepted(r)) {
            throw ProgrammingError(ErrorCode::StuckDevice,
                                   "stuck device outside the tolerance band of the target", log);
        }
        log.success = true;
        return log;
    }

    const auto [a_min, a_max] = params.ramp_range;
    const auto levels = static_cast<int>(std::floor((a_max - a_min) / params.ramp_step + 1e-9)) + 1;

    for (int attempt = 1; attempt <= params.max_program_iterations; ++attempt) {
        log.attempts = attempt;
        if (hooks.on_pulse) {
            hooks.on_pulse(PulseKind::Set, params.v_set);
        }
        cell = set_pulse(cell, params, rng);
        double r = measure(cell);
        if (accepted(r)) {
            log.final_resistance = cell.resistance;
            log.success = true;
            return log;
        }
        for (int k = 0; k < levels; ++k) {
            const double amplitude = std::min(a_min + k * params.ramp_step, a_max);
            if (hooks.on_pulse) {
                hooks.on_pulse(PulseKind::Reset, amplitude);
            }
            cell = reset_pulse(cell, amplitude, params, rng);
            ++log.pulses;
            r = measure(cell);
            if (accepted(r)) {
                log.final_resistance = cell.resistance;
                log.success = true;
                return log;
            }
            if (r > target + band) {
                break;
            }
        }
    }
    log.final_resistance = cell.resistance;
    throw ProgrammingError(ErrorCode::ProgrammingFailed, "write-verify iteration cap reached", log);
}

std::string program_log_csv_header()
{
    return "target_ohm,final_ohm,attempts,pulses,success";
}

std::string program_log_csv_row(const ProgramLog& log)
{
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%d,%d,%d", log.target, log.final_resistance,
                  log.attempts, log.pulses, log.success ? 1 : 0);
    return buf;
}

}  // namespace memxbar::device

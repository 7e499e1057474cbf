// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>

#include "memxbar/error.hpp"
#include "memxbar/rng.hpp"

namespace memxbar::device {

/// Electrical and programming parameters of one memristive device.
struct DeviceParams {
    double r_lrs_nominal = 10e3;
    double r_hrs_nominal = 300e3;
    double v_threshold = 1.5;
    double v_set = -3.0;
    double i_limit_set = 300e-6;
    std::array<double, 2> ramp_range{1.5, 3.0};
    double ramp_step = 1.5 / 128.0;
    double pulse_width = 1e-3;
    double v_read = 0.5;
    double program_tolerance = 0.15;
    double response_noise_sigma = 0.03;
    int max_program_iterations = 50;
    /// Exponent of the amplitude-to-resistance map g(a).
    double ramp_gamma = 1.0;

    /// Throws Error(InvalidArgument) when an invariant is broken.
    void validate() const;

    [[nodiscard]] double r_floor() const noexcept
    {
        return r_lrs_nominal * (1.0 - 3.0 * response_noise_sigma);
    }
    [[nodiscard]] double clamp_resistance(double r) const noexcept;
};

struct MemristorCell {
    double resistance = 0.0;
    std::optional<double> stuck;

    static MemristorCell stuck_at(double r) { return {r, r}; }
    [[nodiscard]] bool is_stuck() const noexcept { return stuck.has_value(); }
};

struct ProgramLog {
    double target = 0.0;
    int attempts = 0;
    int pulses = 0;
    double final_resistance = 0.0;
    bool success = false;
};

/// Raised when programming gives up; carries the partial log.
class ProgrammingError : public Error {
public:
    ProgrammingError(ErrorCode code, const std::string& what, ProgramLog log)
        : Error(code, what), log_(log) {}
    [[nodiscard]] const ProgramLog& log() const noexcept { return log_; }

private:
    ProgramLog log_;
};

/// Ohmic read; the read amplitude must stay below the switching threshold.
double read_current(const MemristorCell& cell, double v, const DeviceParams& params);

/// Monotone amplitude-to-resistance map of a RESET pulse, noise-free.
double reset_response(double amplitude, const DeviceParams& params);

MemristorCell set_pulse(MemristorCell cell, const DeviceParams& params, Rng& rng);
MemristorCell reset_pulse(MemristorCell cell, double amplitude, const DeviceParams& params, Rng& rng);

enum class PulseKind { Set, Reset, Read };

/// Optional instrumentation used when a cell is programmed inside an array.
struct ProgramHooks {
    /// Measured resistance after a pulse. Defaults to v_read / read_current.
    std::function<double(const MemristorCell&)> measure;
    /// Worst-case measurement error at a given reading; narrows the
    /// acceptance band.
    std::function<double(double)> uncertainty;
    std::function<void(PulseKind, double amplitude)> on_pulse;
};

/// Write-verify programming: SET, then a RESET ramp with a read after every
/// pulse. An overshoot (or an exhausted ramp) restarts from SET.
ProgramLog program_to(MemristorCell& cell, double target, const DeviceParams& params, Rng& rng,
                      const ProgramHooks& hooks = {});

/// CSV header/row for ProgramLog records.
std::string program_log_csv_header();
std::string program_log_csv_row(const ProgramLog& log);

}  // namespace memxbar::device

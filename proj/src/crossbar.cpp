// SPDX-License-Identifier: Apache-2.0
#include "memxbar/crossbar.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "memxbar/error.hpp"

namespace memxbar::crossbar {

namespace {

constexpr double kDropEps = 1e-12;

}  // namespace

double AdcConfig::step() const noexcept
{
    return 2.0 * full_scale / std::ldexp(1.0, bits);
}

AdcReading adc_read(double u, const AdcConfig& adc) noexcept
{
    const double step = adc.step();
    const double top = adc.full_scale - step;
    AdcReading out;
    if (u > top || u < -adc.full_scale) {
        out.saturated = true;
        out.value = u > 0.0 ? top : -adc.full_scale;
        return out;
    }
    out.value = std::round(u / step) * step;
    return out;
}

void CrossbarConfig::validate(const device::DeviceParams& device) const
{
    auto fail = [](const char* what) { throw Error(ErrorCode::InvalidArgument, what); };
    if (rows == 0 || cols == 0) {
        fail("crossbar: empty array");
    }
    if (!(r_f > 0.0 && r_1 > 0.0 && r_2 > 0.0 && r_4 > 0.0 && r_3 >= 0.0)) {
        fail("crossbar: resistor values must be positive (r_3 may be 0)");
    }
    if (!(u_in_max > 0.0 && u_in_max < device.v_threshold)) {
        fail("crossbar: data range must stay below the device threshold");
    }
    if (!(u_sat > 0.0 && u_rail > 0.0)) {
        fail("crossbar: saturation levels must be positive");
    }
    if (adc.bits < 2 || !(adc.full_scale > 0.0)) {
        fail("crossbar: malformed ADC configuration");
    }
}

Crossbar::Crossbar(CrossbarConfig config, device::DeviceParams device)
    : config_(config), device_(device)
{
    device_.validate();
    config_.validate(device_);
    grid_.assign(config_.rows * config_.cols, device::MemristorCell{device_.r_hrs_nominal, {}});
}

device::MemristorCell& Crossbar::cell(std::size_t row, std::size_t col)
{
    if (row >= config_.rows || col >= config_.cols) {
        throw Error(ErrorCode::InvalidArgument, "crossbar: cell index out of range");
    }
    return grid_[row * config_.cols + col];
}

const device::MemristorCell& Crossbar::cell(std::size_t row, std::size_t col) const
{
    if (row >= config_.rows || col >= config_.cols) {
        throw Error(ErrorCode::InvalidArgument, "crossbar: cell index out of range");
    }
    return grid_[row * config_.cols + col];
}

std::string Crossbar::to_csv() const
{
    std::string out = "row,col,resistance_ohm,stuck_flag,stuck_ohm\n";
    char buf[128];
    for (std::size_t r = 0; r < config_.rows; ++r) {
        for (std::size_t c = 0; c < config_.cols; ++c) {
            const auto& m = cell(r, c);
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%d,%.17g\n", r, c, m.resistance,
                          m.stuck ? 1 : 0, m.stuck.value_or(0.0));
            out += buf;
        }
    }
    return out;
}

Crossbar Crossbar::from_csv(const std::string& text, CrossbarConfig config,
                            device::DeviceParams device)
{
    Crossbar xbar(config, device);
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    std::size_t seen = 0;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::size_t r = 0;
        std::size_t c = 0;
        double resistance = 0.0;
        int stuck = 0;
        double stuck_ohm = 0.0;
        if (std::sscanf(line.c_str(), "%zu,%zu,%lf,%d,%lf", &r, &c, &resistance, &stuck,
                        &stuck_ohm) != 5) {
            throw Error(ErrorCode::IoError, "crossbar CSV: malformed row '" + line + "'");
        }
        auto& m = xbar.cell(r, c);
        m.resistance = resistance;
        if (stuck != 0) {
            m.stuck = stuck_ohm;
        }
        ++seen;
    }
    if (seen != config.rows * config.cols) {
        throw Error(ErrorCode::IoError, "crossbar CSV: cell count does not match the configuration");
    }
    return xbar;
}

double row_summed_voltage(const Crossbar& xbar, std::size_t row, std::span<const double> inputs)
{
    const auto& cfg = xbar.config();
    if (inputs.size() != cfg.cols) {
        throw Error(ErrorCode::ShapeMismatch, "crossbar: input count differs from column count");
    }
    double current = 0.0;
    for (std::size_t k = 0; k < cfg.cols; ++k) {
        if (std::abs(inputs[k]) > cfg.u_in_max) {
            throw Error(ErrorCode::InputOverrange, "crossbar: input exceeds the data signal range");
        }
        current += inputs[k] / xbar.resistance(row, k);
    }
    return std::clamp(-cfg.r_f * current, -cfg.u_rail, cfg.u_rail);
}

double activation_clamp(double u, double u_sat) noexcept
{
    return std::clamp(u, -u_sat, u_sat);
}

std::vector<double> layer_forward(const Crossbar& xbar, std::span<const double> inputs,
                                  std::span<const double> bias)
{
    const auto& cfg = xbar.config();
    if (cfg.rows % 2 != 0) {
        throw Error(ErrorCode::OddRowCount, "crossbar: differential pairs need an even row count");
    }
    const std::size_t neurons = cfg.rows / 2;
    if (!bias.empty() && bias.size() != neurons) {
        throw Error(ErrorCode::ShapeMismatch, "crossbar: one bias per neuron expected");
    }
    std::vector<double> out(neurons);
    for (std::size_t k = 0; k < neurons; ++k) {
        const double inverting = row_summed_voltage(xbar, 2 * k, inputs);
        const double non_inverting = row_summed_voltage(xbar, 2 * k + 1, inputs);
        double u = cfg.k_diff() * (non_inverting - inverting);
        if (!bias.empty()) {
            u += bias[k];
        }
        out[k] = cfg.k_scale() * activation_clamp(u, cfg.u_sat);
    }
    return out;
}

double BiasAssignment::max_nontarget_drop() const noexcept
{
    double worst = 0.0;
    for (std::size_t r = 0; r < row_voltage.size(); ++r) {
        for (std::size_t c = 0; c < col_voltage.size(); ++c) {
            if (r == target_row && c == target_col) {
                continue;
            }
            worst = std::max(worst, std::abs(drop(r, c)));
        }
    }
    return worst;
}

BiasAssignment bias_assignment(const Crossbar& xbar, std::size_t row, std::size_t col,
                               BiasMode mode, double amplitude)
{
    const auto& cfg = xbar.config();
    if (row >= cfg.rows || col >= cfg.cols) {
        throw Error(ErrorCode::InvalidArgument, "bias assignment: target outside the array");
    }
    BiasAssignment b;
    b.target_row = row;
    b.target_col = col;
    b.mode = mode;
    b.row_voltage.assign(cfg.rows, 0.0);
    b.col_voltage.assign(cfg.cols, 0.0);

    switch (mode) {
    case BiasMode::Set:
        // Other rows follow the pulse, other columns sit halfway.
        std::fill(b.row_voltage.begin(), b.row_voltage.end(), amplitude);
        std::fill(b.col_voltage.begin(), b.col_voltage.end(), amplitude / 2.0);
        break;
    case BiasMode::Reset: {
        const double half = xbar.device().ramp_range[1] / 2.0;
        std::fill(b.row_voltage.begin(), b.row_voltage.end(), half);
        std::fill(b.col_voltage.begin(), b.col_voltage.end(), half);
        break;
    }
    case BiasMode::Read:
        break;
    }
    b.row_voltage[row] = 0.0;
    b.col_voltage[col] = amplitude;
    return b;
}

double resistance_from_readout(double u_test, double r_f, double u_out)
{
    if (u_out == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return std::abs(u_test * r_f / u_out);
}

double readout_uncertainty(double r_measured, double u_quantized, double adc_step) noexcept
{
    const double half = adc_step / 2.0;
    const double u = std::abs(u_quantized);
    if (u <= half || !std::isfinite(r_measured)) {
        return std::numeric_limits<double>::infinity();
    }
    return r_measured * half / (u - half);
}

device::ProgramLog program_cell(Crossbar& xbar, std::size_t row, std::size_t col, double target_r,
                                Rng& rng)
{
    const auto& cfg = xbar.config();
    const auto& dev = xbar.device();
    auto& target = xbar.cell(row, col);

    // Measurement state shared between measure() and uncertainty().
    double last_u = 0.0;
    bool last_saturated = false;

    device::ProgramHooks hooks;
    hooks.on_pulse = [&](device::PulseKind kind, double amplitude) {
        const BiasMode mode = kind == device::PulseKind::Set     ? BiasMode::Set
                              : kind == device::PulseKind::Reset ? BiasMode::Reset
                                                                 : BiasMode::Read;
        const auto bias = bias_assignment(xbar, row, col, mode, amplitude);
        if (bias.max_nontarget_drop() > dev.v_threshold + kDropEps) {
            throw Error(ErrorCode::BiasViolation, "bias scheme exposes a non-target cell to a switching drop");
        }
    };
    hooks.measure = [&](const device::MemristorCell& m) {
        const double i = device::read_current(m, dev.v_read, dev);
        const double u_out = -cfg.r_f * i;
        const auto reading = adc_read(u_out, cfg.adc);
        last_u = reading.value;
        last_saturated = reading.saturated;
        return resistance_from_readout(dev.v_read, cfg.r_f, reading.value);
    };
    hooks.uncertainty = [&](double r_measured) {
        if (last_saturated) {
            return std::numeric_limits<double>::infinity();
        }
        return readout_uncertainty(r_measured, last_u, cfg.adc.step());
    };
    return device::program_to(target, target_r, dev, rng, hooks);
}

}  // namespace memxbar::crossbar

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "memxbar/device.hpp"

namespace memxbar::crossbar {

/// Bipolar ADC on the summing-amplifier outputs.
struct AdcConfig {
    int bits = 12;
    double full_scale = 5.0;

    [[nodiscard]] double step() const noexcept;
};

struct AdcReading {
    double value = 0.0;
    bool saturated = false;
};

AdcReading adc_read(double u, const AdcConfig& adc) noexcept;

struct CrossbarConfig {
    std::size_t rows = 16;
    std::size_t cols = 16;
    double r_f = 100e3;
    double r_1 = 10e3;
    double r_2 = 10e3;
    /// r_3 = 0 bypasses the output divider (K_SCALE = 1).
    double r_3 = 0.0;
    double r_4 = 10e3;
    /// Activation saturation of the neuron stage.
    double u_sat = 1.0;
    /// Output rail of the per-row summing amplifiers.
    double u_rail = 15.0;
    double u_in_max = 1.0;
    double resistor_tolerance = 0.01;
    AdcConfig adc{};

    [[nodiscard]] double k_diff() const noexcept { return r_2 / r_1; }
    [[nodiscard]] double k_scale() const noexcept { return r_4 / (r_3 + r_4); }
    void validate(const device::DeviceParams& device) const;
};

/// Passive array. Rows 2k and 2k+1 hold the differential synapses of neuron
/// k: row 2k (R_M1) feeds the inverting input of the differential
/// amplifier, row 2k+1 (R_M2) the non-inverting one. Columns carry inputs.
class Crossbar {
public:
    Crossbar() : Crossbar(CrossbarConfig{}, device::DeviceParams{}) {}
    /// Every cell starts in HRS.
    Crossbar(CrossbarConfig config, device::DeviceParams device);

    [[nodiscard]] const CrossbarConfig& config() const noexcept { return config_; }
    [[nodiscard]] const device::DeviceParams& device() const noexcept { return device_; }
    [[nodiscard]] std::size_t rows() const noexcept { return config_.rows; }
    [[nodiscard]] std::size_t cols() const noexcept { return config_.cols; }

    [[nodiscard]] device::MemristorCell& cell(std::size_t row, std::size_t col);
    [[nodiscard]] const device::MemristorCell& cell(std::size_t row, std::size_t col) const;
    [[nodiscard]] double resistance(std::size_t row, std::size_t col) const
    {
        return cell(row, col).resistance;
    }
    [[nodiscard]] const std::vector<device::MemristorCell>& cells() const noexcept { return grid_; }

    /// One row per cell: row,col,resistance_ohm,stuck_flag,stuck_ohm.
    [[nodiscard]] std::string to_csv() const;
    static Crossbar from_csv(const std::string& text, CrossbarConfig config,
                             device::DeviceParams device);

private:
    CrossbarConfig config_;
    device::DeviceParams device_;
    std::vector<device::MemristorCell> grid_;
};

/// Summing-amplifier output of one row: -r_f * sum(u_k / R(row, k)),
/// limited by the amplifier rail.
double row_summed_voltage(const Crossbar& xbar, std::size_t row, std::span<const double> inputs);

/// Neuron outputs of the array. `bias` (optional, one per neuron) is the
/// digitally injected bias, added ahead of the activation stage.
std::vector<double> layer_forward(const Crossbar& xbar, std::span<const double> inputs,
                                  std::span<const double> bias = {});

double activation_clamp(double u, double u_sat) noexcept;

enum class BiasMode { Set, Reset, Read };

struct BiasAssignment {
    std::vector<double> row_voltage;
    std::vector<double> col_voltage;
    std::size_t target_row = 0;
    std::size_t target_col = 0;
    BiasMode mode = BiasMode::Read;

    /// Voltage across cell (row, col): column potential minus row potential.
    [[nodiscard]] double drop(std::size_t row, std::size_t col) const noexcept
    {
        return col_voltage[col] - row_voltage[row];
    }
    [[nodiscard]] double max_nontarget_drop() const noexcept;
};

/// Electrode potentials for programming or reading one cell. `amplitude` is
/// the pulse on the target column (SET: v_set, RESET: ramp amplitude, READ:
/// v_read); rows sit at virtual ground through their summing amplifiers.
BiasAssignment bias_assignment(const Crossbar& xbar, std::size_t row, std::size_t col,
                               BiasMode mode, double amplitude);

/// R_M = U_TEST * R_F / U_OUT.
double resistance_from_readout(double u_test, double r_f, double u_out);

/// Worst-case |R - R_measured| for a quantized readout whose magnitude is
/// `u_quantized` (half-step rounding error).
double readout_uncertainty(double r_measured, double u_quantized, double adc_step) noexcept;

/// Write-verify programming of one cell. Resistance is inferred from the
/// quantized summing-amplifier output; the bias map of every pulse is checked
/// against the device threshold.
device::ProgramLog program_cell(Crossbar& xbar, std::size_t row, std::size_t col, double target_r,
                                Rng& rng);

}  // namespace memxbar::crossbar

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "memxbar/compile.hpp"
#include "memxbar/crossbar.hpp"

namespace memxbar::crossbar {

/// The 16-8-4 perceptron laid out on two arrays. Layer 1 uses 16 rows x 16
/// columns, layer 2 uses 8 rows x 8 columns of the second array; unused
/// cells stay in HRS. Biases are applied digitally.
struct CircuitNetwork {
    Crossbar hidden;
    Crossbar output;
    netmodel::Hidden b_hidden{};
    netmodel::Output b_out{};
};

/// Arrays whose cells hold the compiled nominals exactly.
CircuitNetwork build_circuit(const mapping::CompiledNetwork& net, const CrossbarConfig& config,
                             const device::DeviceParams& device);

/// Target resistance of every used cell, as (array index 0/1, row, col, ohm).
struct CellTarget {
    int array = 0;
    std::size_t row = 0;
    std::size_t col = 0;
    double resistance = 0.0;
};
std::vector<CellTarget> cell_targets(const mapping::CompiledNetwork& net);

netmodel::Output circuit_forward(const CircuitNetwork& circuit, const netmodel::Input& x);

}  // namespace memxbar::crossbar

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "memxbar/mapping.hpp"
#include "memxbar/netmodel.hpp"

namespace memxbar::mapping {

/// One synapse of the network after translation to device nominals.
struct CompiledSynapse {
    netmodel::Layer layer = netmodel::Layer::Hidden;
    std::size_t input = 0;
    std::size_t neuron = 0;
    double w_target = 0.0;
    SynapseNominals nominals;
    double w_achieved = 0.0;
    bool stuck = false;
    bool fixed_bias = false;
};

/// A device known to ignore programming pulses, addressed by array position.
/// Row 2k / 2k+1 is the R_M1 / R_M2 device of neuron k; column is the input.
struct StuckCell {
    netmodel::Layer layer = netmodel::Layer::Hidden;
    std::size_t row = 0;
    std::size_t col = 0;
    double resistance = 0.0;
};

struct CompiledNetwork {
    /// Biases and activation constants come from here; weights are ignored.
    netmodel::MlpParams base;
    double r_f = 100e3;
    /// Hidden-layer synapses (input-major) followed by output-layer ones.
    std::vector<CompiledSynapse> synapses;

    /// Informational parameters with the achieved weights.
    [[nodiscard]] netmodel::MlpParams realized() const;
};

CompiledNetwork compile_network(const netmodel::MlpParams& params, double r_f,
                                const ResistanceRange& range,
                                const InverseStrategy& strategy = {},
                                const std::vector<StuckCell>& stuck = {});

/// Training constraints implied by stuck devices: fully stuck pairs become
/// fixed weights; a single stuck device restricts the weight to the values
/// reachable by stepping its partner through `free_states` resistance levels.
std::vector<netmodel::StuckConstraint> stuck_constraints(const std::vector<StuckCell>& stuck,
                                                         double r_f, const ResistanceRange& range,
                                                         int free_states = 64);

/// layer,neuron,input,w_target,r_m1,r_m2,w_achieved,stuck_flag
std::string compile_report_csv(const CompiledNetwork& net);
CompiledNetwork compiled_from_csv(const std::string& text, const netmodel::MlpParams& base,
                                  double r_f);

}  // namespace memxbar::mapping

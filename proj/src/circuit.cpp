// SPDX-License-Identifier: Apache-2.0
#include "memxbar/circuit.hpp"

#include "memxbar/error.hpp"

namespace memxbar::crossbar {

std::vector<CellTarget> cell_targets(const mapping::CompiledNetwork& net)
{
    std::vector<CellTarget> out;
    out.reserve(net.synapses.size() * 2);
    for (const auto& s : net.synapses) {
        const int array = s.layer == netmodel::Layer::Hidden ? 0 : 1;
        out.push_back({array, 2 * s.neuron, s.input, s.nominals.r_m1});
        out.push_back({array, 2 * s.neuron + 1, s.input, s.nominals.r_m2});
    }
    return out;
}

CircuitNetwork build_circuit(const mapping::CompiledNetwork& net, const CrossbarConfig& config,
                             const device::DeviceParams& device)
{
    if (config.rows < 2 * netmodel::kHidden || config.cols < netmodel::kInputs) {
        throw Error(ErrorCode::InvalidArgument, "circuit: arrays too small for the 16-8-4 network");
    }
    CrossbarConfig cfg = config;
    cfg.r_f = net.r_f;
    CircuitNetwork c{Crossbar(cfg, device), Crossbar(cfg, device), net.base.b_hidden, net.base.b_out};
    for (const auto& t : cell_targets(net)) {
        auto& xbar = t.array == 0 ? c.hidden : c.output;
        xbar.cell(t.row, t.col).resistance = t.resistance;
    }
    return c;
}

netmodel::Output circuit_forward(const CircuitNetwork& circuit, const netmodel::Input& x)
{
    std::vector<double> in(circuit.hidden.cols(), 0.0);
    std::copy(x.begin(), x.end(), in.begin());
    std::vector<double> bias1(circuit.hidden.rows() / 2, 0.0);
    std::copy(circuit.b_hidden.begin(), circuit.b_hidden.end(), bias1.begin());
    const auto h = layer_forward(circuit.hidden, in, bias1);

    std::vector<double> in2(circuit.output.cols(), 0.0);
    std::copy(h.begin(), h.begin() + netmodel::kHidden, in2.begin());
    std::vector<double> bias2(circuit.output.rows() / 2, 0.0);
    std::copy(circuit.b_out.begin(), circuit.b_out.end(), bias2.begin());
    const auto y = layer_forward(circuit.output, in2, bias2);

    netmodel::Output out{};
    std::copy(y.begin(), y.begin() + netmodel::kOutputs, out.begin());
    return out;
}

}  // namespace memxbar::crossbar

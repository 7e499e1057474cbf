// SPDX-License-Identifier: Apache-2.0
#include "memxbar/compile.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <tuple>

#include "memxbar/error.hpp"

namespace memxbar::mapping {

using netmodel::Layer;

namespace {

using PairKey = std::tuple<Layer, std::size_t, std::size_t>;  // layer, neuron, input

std::map<PairKey, std::pair<device::MemristorCell, device::MemristorCell>>
index_stuck(const std::vector<StuckCell>& stuck)
{
    std::map<PairKey, std::pair<device::MemristorCell, device::MemristorCell>> pairs;
    for (const auto& s : stuck) {
        const std::size_t neurons = s.layer == Layer::Hidden ? netmodel::kHidden : netmodel::kOutputs;
        const std::size_t inputs = s.layer == Layer::Hidden ? netmodel::kInputs : netmodel::kHidden;
        if (s.row / 2 >= neurons || s.col >= inputs) {
            throw Error(ErrorCode::InvalidArgument, "stuck cell outside the used part of the array");
        }
        auto& pair = pairs[{s.layer, s.row / 2, s.col}];
        auto& cell = s.row % 2 == 0 ? pair.first : pair.second;
        cell = device::MemristorCell::stuck_at(s.resistance);
    }
    return pairs;
}

const char* layer_name(Layer layer)
{
    return layer == Layer::Hidden ? "hidden" : "output";
}

}  // namespace

netmodel::MlpParams CompiledNetwork::realized() const
{
    netmodel::MlpParams p = base;
    for (const auto& s : synapses) {
        if (s.layer == Layer::Hidden) {
            p.w_hidden[s.input][s.neuron] = s.w_achieved;
        } else {
            p.w_out[s.input][s.neuron] = s.w_achieved;
        }
    }
    return p;
}

CompiledNetwork compile_network(const netmodel::MlpParams& params, double r_f,
                                const ResistanceRange& range, const InverseStrategy& strategy,
                                const std::vector<StuckCell>& stuck)
{
    const auto stuck_pairs = index_stuck(stuck);
    CompiledNetwork net;
    net.base = params;
    net.r_f = r_f;

    auto emit = [&](Layer layer, std::size_t input, std::size_t neuron, double w) {
        CompiledSynapse s;
        s.layer = layer;
        s.input = input;
        s.neuron = neuron;
        s.w_target = w;
        const auto it = stuck_pairs.find({layer, neuron, input});
        if (it != stuck_pairs.end()) {
            const auto comp = compensate_stuck(it->second, w, r_f, range, strategy);
            s.nominals = comp.nominals;
            s.w_achieved = comp.achieved_w;
            s.stuck = true;
            s.fixed_bias = comp.fixed_bias;
        } else {
            s.nominals = resistances_for_weight(w, r_f, range, strategy);
            s.w_achieved = weight_from_resistances(s.nominals);
        }
        net.synapses.push_back(s);
    };
    for (std::size_t i = 0; i < netmodel::kInputs; ++i) {
        for (std::size_t j = 0; j < netmodel::kHidden; ++j) {
            emit(Layer::Hidden, i, j, params.w_hidden[i][j]);
        }
    }
    for (std::size_t j = 0; j < netmodel::kHidden; ++j) {
        for (std::size_t r = 0; r < netmodel::kOutputs; ++r) {
            emit(Layer::Output, j, r, params.w_out[j][r]);
        }
    }
    return net;
}

std::vector<netmodel::StuckConstraint> stuck_constraints(const std::vector<StuckCell>& stuck,
                                                         double r_f, const ResistanceRange& range,
                                                         int free_states)
{
    std::vector<netmodel::StuckConstraint> out;
    for (const auto& [key, pair] : index_stuck(stuck)) {
        const auto& [layer, neuron, input] = key;
        netmodel::StuckConstraint c;
        c.layer = layer;
        c.input = input;
        c.neuron = neuron;
        const auto& [m1, m2] = pair;
        if (m1.is_stuck() && m2.is_stuck()) {
            c.allowed = {weight_from_resistances({r_f, *m1.stuck, *m2.stuck})};
        } else {
            const int n = std::max(free_states, 2);
            for (int k = 0; k < n; ++k) {
                const double r = range.r_min + (range.r_max - range.r_min) * k / (n - 1);
                c.allowed.push_back(m1.is_stuck() ? weight_from_resistances({r_f, *m1.stuck, r})
                                                  : weight_from_resistances({r_f, r, *m2.stuck}));
            }
            std::sort(c.allowed.begin(), c.allowed.end());
        }
        out.push_back(std::move(c));
    }
    return out;
}

std::string compile_report_csv(const CompiledNetwork& net)
{
    std::string out = "layer,neuron,input,w_target,r_m1,r_m2,w_achieved,stuck_flag\n";
    char buf[256];
    for (const auto& s : net.synapses) {
        std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.17g,%.17g,%.17g,%.17g,%d\n", layer_name(s.layer),
                      s.neuron, s.input, s.w_target, s.nominals.r_m1, s.nominals.r_m2, s.w_achieved,
                      s.fixed_bias ? 2 : (s.stuck ? 1 : 0));
        out += buf;
    }
    return out;
}

CompiledNetwork compiled_from_csv(const std::string& text, const netmodel::MlpParams& base, double r_f)
{
    CompiledNetwork net;
    net.base = base;
    net.r_f = r_f;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        char layer[16] = {};
        CompiledSynapse s;
        int flag = 0;
        if (std::sscanf(line.c_str(), "%15[^,],%zu,%zu,%lf,%lf,%lf,%lf,%d", layer, &s.neuron, &s.input,
                        &s.w_target, &s.nominals.r_m1, &s.nominals.r_m2, &s.w_achieved, &flag) != 8) {
            throw Error(ErrorCode::IoError, "compile report: malformed row '" + line + "'");
        }
        s.layer = std::string(layer) == "hidden" ? Layer::Hidden : Layer::Output;
        s.nominals.r_f = r_f;
        s.stuck = flag != 0;
        s.fixed_bias = flag == 2;
        net.synapses.push_back(s);
    }
    if (net.synapses.size() != netmodel::kInputs * netmodel::kHidden + netmodel::kHidden * netmodel::kOutputs) {
        throw Error(ErrorCode::IoError, "compile report: unexpected synapse count");
    }
    return net;
}

}  // namespace memxbar::mapping

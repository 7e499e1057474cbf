// SPDX-License-Identifier: Apache-2.0
#include "memxbar/mapping.hpp"

#include <algorithm>
#include <cmath>

#include "memxbar/error.hpp"

namespace memxbar::mapping {

void ResistanceRange::validate() const
{
    if (!(r_min > 0.0 && r_min < r_max)) {
        throw Error(ErrorCode::InvalidArgument, "resistance range: require 0 < r_min < r_max");
    }
    if (n_states && *n_states < 2) {
        throw Error(ErrorCode::InvalidArgument, "resistance range: n_states must be >= 2");
    }
}

double weight_from_resistances(const SynapseNominals& s)
{
    return s.r_f / s.r_m1 - s.r_f / s.r_m2;
}

double weight_from_resistances(double r_f1, double r_m1, double r_f2, double r_m2)
{
    return r_f1 / r_m1 - r_f2 / r_m2;
}

double w_max(double r_f, const ResistanceRange& range)
{
    return r_f * (range.r_max - range.r_min) / (range.r_max * range.r_min);
}

SynapseNominals resistances_for_weight(double w, double r_f, const ResistanceRange& range,
                                       const InverseStrategy& strategy)
{
    range.validate();
    const double ref = strategy.reference_for(range);
    if (!range.contains(ref)) {
        throw Error(ErrorCode::InvalidArgument, "inverse mapping reference outside the range");
    }
    const double limit = r_f / range.r_min - r_f / ref;
    if (!std::isfinite(w) || std::abs(w) > limit * (1.0 + 1e-12)) {
        throw Error(ErrorCode::WeightOutOfRange, "weight magnitude exceeds the realizable range");
    }
    const double programmed = std::max(r_f / (std::abs(w) + r_f / ref), range.r_min);
    if (w >= 0.0) {
        return {r_f, programmed, ref};
    }
    return {r_f, ref, programmed};
}

std::vector<double> discrete_weight_table(double r_f, double r_m2_ref, const ResistanceRange& range,
                                          double step)
{
    if (!(step > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "discrete weight table: step must be positive");
    }
    range.validate();
    std::vector<double> weights;
    const auto count = static_cast<long>(std::floor((range.r_max - range.r_min) / step + 1e-9));
    for (long k = 0; k <= count; ++k) {
        const double r_m1 = range.r_min + static_cast<double>(k) * step;
        weights.push_back(weight_from_resistances({r_f, r_m1, r_m2_ref}));
    }
    std::sort(weights.begin(), weights.end());
    return weights;
}

double quantize_weight(double w, std::span<const double> states)
{
    if (states.empty()) {
        throw Error(ErrorCode::InvalidArgument, "quantize_weight: empty state list");
    }
    const auto hi = std::lower_bound(states.begin(), states.end(), w);
    if (hi == states.begin()) {
        return *hi;
    }
    if (hi == states.end()) {
        return states.back();
    }
    const double upper = *hi;
    const double lower = *(hi - 1);
    const double d_lower = w - lower;
    const double d_upper = upper - w;
    if (d_lower < d_upper) {
        return lower;
    }
    if (d_upper < d_lower) {
        return upper;
    }
    return std::abs(lower) <= std::abs(upper) ? lower : upper;
}

Compensation compensate_stuck(const std::pair<device::MemristorCell, device::MemristorCell>& pair,
                              double target_w, double r_f, const ResistanceRange& range,
                              const InverseStrategy& strategy)
{
    const auto& [m1, m2] = pair;
    Compensation out;
    out.any_stuck = m1.is_stuck() || m2.is_stuck();

    if (!out.any_stuck) {
        out.nominals = resistances_for_weight(target_w, r_f, range, strategy);
        out.achieved_w = weight_from_resistances(out.nominals);
        return out;
    }
    if (m1.is_stuck() && m2.is_stuck()) {
        out.nominals = {r_f, *m1.stuck, *m2.stuck};
        out.achieved_w = weight_from_resistances(out.nominals);
        out.fixed_bias = true;
        return out;
    }

    // Solve W = r_f/r_m1 - r_f/r_m2 for the free device.
    auto solve_free = [&](double conductance_term) {
        if (conductance_term <= 0.0) {
            return range.r_max;
        }
        return std::clamp(r_f / conductance_term, range.r_min, range.r_max);
    };
    if (m2.is_stuck()) {
        const double r_m2 = *m2.stuck;
        out.nominals = {r_f, solve_free(target_w + r_f / r_m2), r_m2};
    } else {
        const double r_m1 = *m1.stuck;
        out.nominals = {r_f, r_m1, solve_free(r_f / r_m1 - target_w)};
    }
    out.achieved_w = weight_from_resistances(out.nominals);
    return out;
}

}  // namespace memxbar::mapping

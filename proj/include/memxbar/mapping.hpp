// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "memxbar/device.hpp"

namespace memxbar::mapping {

/// Nominal values of one differential synapse. r_m1 sits on the row feeding
/// the inverting input of the differential amplifier, r_m2 on the other.
struct SynapseNominals {
    double r_f = 100e3;
    double r_m1 = 300e3;
    double r_m2 = 300e3;
};

struct ResistanceRange {
    double r_min = 10e3;
    double r_max = 300e3;
    std::optional<int> n_states;

    void validate() const;
    [[nodiscard]] bool contains(double r, double rel_eps = 1e-12) const noexcept
    {
        return r >= r_min * (1.0 - rel_eps) && r <= r_max * (1.0 + rel_eps);
    }
};

/// Which device of the pair is held at a reference value while the other
/// carries the magnitude of the weight.
struct InverseStrategy {
    /// Unset: reference is r_max. Set: fixed mid-range reference resistance.
    std::optional<double> reference;

    [[nodiscard]] double reference_for(const ResistanceRange& range) const noexcept
    {
        return reference.value_or(range.r_max);
    }
};

double weight_from_resistances(const SynapseNominals& s);

/// Same as above with separate feedback resistors for the two summing rows.
double weight_from_resistances(double r_f1, double r_m1, double r_f2, double r_m2);

double w_max(double r_f, const ResistanceRange& range);

SynapseNominals resistances_for_weight(double w, double r_f, const ResistanceRange& range,
                                       const InverseStrategy& strategy = {});

/// Weights reachable by stepping r_m1 from r_min to r_max at fixed r_m2_ref,
/// ascending.
std::vector<double> discrete_weight_table(double r_f, double r_m2_ref, const ResistanceRange& range,
                                          double step);

/// Nearest member of a sorted state list; exact midpoints go to the member
/// of smaller magnitude.
double quantize_weight(double w, std::span<const double> states);

struct Compensation {
    SynapseNominals nominals;
    double achieved_w = 0.0;
    /// Both devices stuck: the weight cannot be programmed at all.
    bool fixed_bias = false;
    bool any_stuck = false;
};

/// Realizes target_w on a pair in which either device may be stuck.
Compensation compensate_stuck(const std::pair<device::MemristorCell, device::MemristorCell>& pair,
                              double target_w, double r_f, const ResistanceRange& range,
                              const InverseStrategy& strategy = {});

}  // namespace memxbar::mapping

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memxbar/compile.hpp"
#include "memxbar/dataset.hpp"
#include "memxbar/rng.hpp"

namespace memxbar::tolerance {

enum class Component { RF, RM1, RM2, PerCell, InputDac };

std::string_view to_string(Component c) noexcept;
Component component_from_string(std::string_view name);

/// Relative spread of one circuit parameter. Deviations follow a normal law
/// with sigma = limit / sigmas, truncated at +-limit.
struct ToleranceSpec {
    Component component = Component::RM1;
    double limit = 0.0;
    double sigmas = 3.0;

    void validate() const;
};

double sample_perturbed(double nominal, const ToleranceSpec& spec, Rng& rng);

/// One limit per component; a point of the tolerance space.
struct ToleranceVector {
    double r_f = 0.0;
    double r_m1 = 0.0;
    double r_m2 = 0.0;
    /// Extra independent error of every memristor (programming, retention).
    double per_cell = 0.0;
    /// Gain error of each input DAC channel.
    double input_dac = 0.0;
    double sigmas = 3.0;

    void validate() const;
    [[nodiscard]] ToleranceSpec spec(Component c) const;
    [[nodiscard]] std::vector<ToleranceSpec> specs() const;
    [[nodiscard]] double max_limit() const noexcept;
    /// this + scale * direction, component-wise; sigmas kept from this.
    [[nodiscard]] ToleranceVector along(const ToleranceVector& direction, double scale) const;

    static ToleranceVector from_specs(std::span<const ToleranceSpec> specs);
};

struct Percentiles {
    double low = 0.05;
    double high = 99.95;
};

/// Linear interpolation between closest ranks; `pct` in [0, 100].
double percentile(std::vector<double> values, double pct);

struct WeightBounds {
    double nominal_w = 0.0;
    /// Percent of |nominal| when `relative`, otherwise absolute weight units.
    double low = 0.0;
    double high = 0.0;
    bool relative = true;
};

/// Relative weight error percentiles of a single synapse. A zero nominal
/// weight yields absolute bounds with relative = false.
WeightBounds weight_error_bounds(const mapping::SynapseNominals& syn, const ToleranceVector& tol,
                                 std::size_t trials, Rng& rng, const Percentiles& pct = {});

struct SynapseBound {
    netmodel::Layer layer = netmodel::Layer::Hidden;
    std::size_t input = 0;
    std::size_t neuron = 0;
    WeightBounds bounds;
};

struct Summary {
    double low = 0.0;
    double median = 0.0;
    double high = 0.0;
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
};

Summary summarize(std::span<const double> values, const Percentiles& pct);

struct MonteCarloReport {
    std::size_t trials = 0;
    std::uint64_t master_seed = 0;
    double x_p = 5.0;
    ToleranceVector tolerances;
    Percentiles percentiles;
    double nominal_p_err = 0.0;
    std::vector<double> p_err;
    /// Error rate restricted to S1..S4 test patterns / to Sr patterns.
    std::vector<double> p_err_stimulus;
    std::vector<double> p_err_extraneous;
    Summary summary;
    Summary summary_stimulus;
    Summary summary_extraneous;
    std::vector<SynapseBound> weight_bounds;
    bool pass = false;
    bool pass_stimulus = false;
    bool pass_extraneous = false;
};

struct AnalysisOptions {
    std::size_t trials = 10000;
    double x_p = 5.0;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    Percentiles percentiles;
    bool weight_bounds = true;
};

/// Weights of one Monte Carlo trial, in the order of CompiledNetwork::synapses.
std::vector<double> perturbed_weights(const mapping::CompiledNetwork& net, const ToleranceVector& tol,
                                      Rng& rng, netmodel::Input* dac_gain = nullptr);

MonteCarloReport analyze_tolerances(const mapping::CompiledNetwork& net, const ToleranceVector& tol,
                                    std::span<const dataset::SpikePattern> test,
                                    const AnalysisOptions& options);

std::string report_json(const MonteCarloReport& report);
/// trial,p_err,p_err_stimulus,p_err_extraneous
std::string trials_csv(const MonteCarloReport& report);
/// layer,neuron,input,w_nominal,low,high,relative
std::string weight_bounds_csv(const MonteCarloReport& report);

/// Tolerance points to test: base + scale * direction for each scale of the
/// schedule (ascending), then bisection between the last passing and the
/// first failing scale.
struct ExperimentPlan {
    ToleranceVector base;
    ToleranceVector direction;
    std::vector<double> schedule;
    /// Stop bisection once the bracket spans this much of the largest limit.
    double resolution = 0.01;
    std::size_t trials = 1000;

    void validate() const;
};

struct PlanPoint {
    double scale = 0.0;
    ToleranceVector tolerances;
    double max_p_err = 0.0;
    bool pass = false;
};

struct SynthesisResult {
    double scale = 0.0;
    ToleranceVector tolerances;
    std::vector<PlanPoint> evaluated;
};

SynthesisResult synthesize_tolerances(const mapping::CompiledNetwork& net,
                                      std::span<const dataset::SpikePattern> test, double x_p,
                                      const ExperimentPlan& plan, std::uint64_t seed,
                                      unsigned threads = 0);

std::string synthesis_json(const SynthesisResult& result);

enum class StateRegime {
    /// Both devices of the pair take any of the n levels.
    Pairwise,
    /// One device pinned at r_max, the other takes any of the n levels.
    Pinned,
};

/// Distinct weights realizable with n evenly spaced resistance levels, ascending.
std::vector<double> weight_states(int n, const mapping::ResistanceRange& range, double r_f,
                                  StateRegime regime);

struct SweepConfig {
    std::vector<int> counts{2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    StateRegime regime = StateRegime::Pairwise;
    /// Epochs of projected re-training after rounding; 0 disables it.
    int refit_epochs = 200;
    /// Epochs of projected training from a fresh initialization; the start
    /// with the lower training loss is kept. 0 disables it.
    int scratch_epochs = 500;
    /// Above this many states, rounding is done without materializing the
    /// state list and no re-training takes place.
    std::size_t max_refit_states = 1U << 14;
    netmodel::TrainConfig train;
};

struct SweepPoint {
    int n_states = 0;
    std::size_t weight_states = 0;
    double p_err_rounded = 0.0;
    double p_err = 0.0;
    bool from_scratch = false;
};

std::vector<SweepPoint> discrete_state_sweep(const netmodel::MlpParams& net,
                                             const dataset::DatasetSplit& data,
                                             const mapping::ResistanceRange& range, double r_f,
                                             const SweepConfig& config);

/// Smallest n such that every swept count >= n keeps p_err <= x_p.
std::optional<int> threshold_states(std::span<const SweepPoint> points, double x_p);

/// n_states,weight_states,p_err_rounded,p_err,from_scratch
std::string sweep_csv(std::span<const SweepPoint> points);

}  // namespace memxbar::tolerance

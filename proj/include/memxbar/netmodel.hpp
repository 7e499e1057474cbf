// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace memxbar::netmodel {

inline constexpr std::size_t kInputs = 16;
inline constexpr std::size_t kHidden = 8;
inline constexpr std::size_t kOutputs = 4;

using Input = std::array<double, kInputs>;
using Hidden = std::array<double, kHidden>;
using Output = std::array<double, kOutputs>;

enum class Label { S1 = 0, S2 = 1, S3 = 2, S4 = 3, Sr = 4 };
inline constexpr std::size_t kLabelCount = 5;

std::string_view to_string(Label label) noexcept;
Label label_from_string(std::string_view name);

/// Saturating linear transfer function: slope * z clipped to [lower, upper].
struct Activation {
    double slope = 1.0;
    double lower = -1.0;
    double upper = 1.0;

    [[nodiscard]] double apply(double z) const noexcept;
    /// Slope inside the band (kinks included), zero outside.
    [[nodiscard]] double derivative(double z) const noexcept;
};

struct MlpParams {
    /// w_hidden[i][j]: input i -> hidden neuron j.
    std::array<std::array<double, kHidden>, kInputs> w_hidden{};
    Hidden b_hidden{};
    /// w_out[j][r]: hidden neuron j -> output neuron r.
    std::array<std::array<double, kOutputs>, kHidden> w_out{};
    Output b_out{};
    Activation hidden_activation{};
    Activation output_activation{};

    static constexpr std::size_t kParamCount =
        kInputs * kHidden + kHidden + kHidden * kOutputs + kOutputs;
    using Vector = std::array<double, kParamCount>;

    /// Flat layout: w_hidden (row-major), b_hidden, w_out (row-major), b_out.
    [[nodiscard]] Vector flatten() const noexcept;
    void assign(const Vector& v) noexcept;
    [[nodiscard]] double max_abs_weight() const noexcept;
};

Output forward(const MlpParams& p, const Input& x);

/// Mean over patterns of the summed squared output error.
double mse(std::span<const Output> y, std::span<const Output> yhat);

/// Percentage of mismatched labels.
double p_err(std::span<const Label> predictions, std::span<const Label> targets);

/// Sr when no component is positive, otherwise the argmax (lowest index wins ties).
Label classify(const Output& yhat) noexcept;

struct TrainingSet {
    std::vector<Input> x;
    std::vector<Output> y;
};

/// Training loss over the set plus its gradient w.r.t. the flat parameters.
double loss_and_gradient(const MlpParams& p, const TrainingSet& data, MlpParams::Vector& grad);
double loss(const MlpParams& p, const TrainingSet& data);

enum class Layer { Hidden, Output };

/// A synapse whose devices cannot be freely programmed: the weight is held at
/// a single value or restricted to a small set.
struct StuckConstraint {
    Layer layer = Layer::Hidden;
    std::size_t input = 0;
    std::size_t neuron = 0;
    std::vector<double> allowed;
};

/// Weight perturbation used by tolerance-aware training. A weight w becomes
/// w + (|w| + offset) * e1 + offset * e2 with e ~ truncated normal
/// (limit 3 sigma), which mirrors independent spread of the two devices of a
/// differential pair whose reference branch contributes `offset`.
struct WeightNoise {
    double sigma = 0.0;
    double offset = 0.0;
    /// Perturbed copies averaged per loss evaluation.
    int draws = 4;
    /// Epochs between fresh draws.
    int redraw_every = 25;
};

struct TrainConfig {
    double mse_target = 1e-4;
    int max_epochs = 10000;
    double initial_step = 0.5;
    double armijo_c = 1e-4;
    double backtrack = 0.5;
    int max_backtracks = 40;
    /// Largest change of any single parameter in one epoch.
    double max_move = 0.1;
    /// Allowed weight values; every weight is snapped to the closest after each update.
    std::optional<std::vector<double>> discrete_states;
    std::vector<StuckConstraint> stuck;
    /// Box limit on |weight|, normally W_MAX of the resistance range.
    std::optional<double> weight_limit;
    double init_range = 0.5;
    std::uint64_t seed = 1;
    /// When set, minimizes the expected loss under this perturbation instead
    /// of the nominal loss. The learning curve still reports the nominal MSE.
    std::optional<WeightNoise> noise;

    void validate() const;
};

struct TrainResult {
    MlpParams params;
    /// MSE after every epoch.
    std::vector<double> curve;
    bool converged = false;
};

/// Weights uniform in [-range, range], biases zero.
MlpParams init_params(std::uint64_t seed, double range, const MlpParams& shape = {});

TrainResult train_discrete(const MlpParams& p0, const TrainingSet& data, const TrainConfig& cfg);

/// Convenience: predicted labels for a batch.
std::vector<Label> predict(const MlpParams& p, std::span<const Input> xs);

}  // namespace memxbar::netmodel

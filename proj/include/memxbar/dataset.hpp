// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "memxbar/netmodel.hpp"

namespace memxbar::dataset {

using netmodel::Label;

inline constexpr std::size_t kSites = 4;
inline constexpr std::size_t kChannels = 4;
inline constexpr std::size_t kSpikes = 4;
inline constexpr double kDefaultStep = 0.0025;

using Times = std::array<double, kChannels * kSpikes>;

/// Mean arrival time (ms) of spike k on channel c after stimulation of site s,
/// stored as means[s][c][k].
struct StimulusProfile {
    std::array<std::array<std::array<double, kSpikes>, kChannels>, kSites> means{};
    double deviation_bound = 0.30;
    double window = 50.0;

    void validate() const;
};

/// Latin-square latencies (channel nearest the stimulated site fires first,
/// 8 ms apart) followed by three inter-spike gaps drawn from [5, 6] ms with a
/// fixed seed. Spans 3..45 ms.
StimulusProfile default_profile();

struct SpikePattern {
    netmodel::Input values{};
    Label label = Label::Sr;
};

struct RawPattern {
    Times times{};
    Label label = Label::Sr;
};

/// Counts per label, indexed by Label.
using ClassCounts = std::array<std::size_t, netmodel::kLabelCount>;

struct DatasetSplit {
    std::vector<SpikePattern> train;
    std::vector<SpikePattern> test;
    ClassCounts train_counts{};
    ClassCounts test_counts{};
};

inline constexpr ClassCounts kDefaultTrainCounts{735, 760, 724, 754, 3027};
inline constexpr ClassCounts kDefaultTestCounts{265, 240, 276, 246, 973};

/// Gaussian jitter (deviation bound = 3 sigma, truncated) around the profile
/// means, clamped to the window and sorted per channel. Pattern n draws from
/// its own substream of `seed`.
std::vector<RawPattern> synthesize_stimulus_raw(const StimulusProfile& profile,
                                                std::size_t count_per_site, std::uint64_t seed);
std::vector<SpikePattern> synthesize_stimulus_patterns(const StimulusProfile& profile,
                                                       std::size_t count_per_site,
                                                       std::uint64_t seed,
                                                       double step = kDefaultStep);

/// Spontaneous activity: four uniform arrival times per channel, sorted.
std::vector<RawPattern> synthesize_extraneous_raw(std::size_t count, double window,
                                                  std::uint64_t seed);
std::vector<SpikePattern> synthesize_extraneous(std::size_t count, double window,
                                                std::uint64_t seed, double step = kDefaultStep);

/// t / window rounded half-up to a multiple of `step`.
netmodel::Input normalize_quantize(const Times& times, double window, double step = kDefaultStep);
double quantize_level(double value, double step = kDefaultStep);

/// Shuffles, then fills the per-class `train_counts`; everything else goes
/// to test.
DatasetSplit make_split(std::vector<SpikePattern> patterns, std::uint64_t seed,
                        const ClassCounts& train_counts = kDefaultTrainCounts,
                        const ClassCounts& test_counts = kDefaultTestCounts);

netmodel::Output target_vector(Label label) noexcept;

ClassCounts count_labels(std::span<const SpikePattern> patterns) noexcept;

/// 1000 patterns per site plus 4000 extraneous ones, then the default split.
DatasetSplit build_default_split(const StimulusProfile& profile, std::uint64_t seed,
                                 double step = kDefaultStep);

netmodel::TrainingSet to_training_set(std::span<const SpikePattern> patterns);
std::vector<netmodel::Input> inputs_of(std::span<const SpikePattern> patterns);
std::vector<Label> labels_of(std::span<const SpikePattern> patterns);

std::string to_csv(std::span<const SpikePattern> patterns);
std::vector<SpikePattern> from_csv(const std::string& text);

}  // namespace memxbar::dataset

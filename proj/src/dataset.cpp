// SPDX-License-Identifier: Apache-2.0
#include "memxbar/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "memxbar/error.hpp"
#include "memxbar/rng.hpp"

namespace memxbar::dataset {

namespace {

constexpr std::uint64_t kStimulusTag = 0x5717;
constexpr std::uint64_t kExtraneousTag = 0xe87a;
constexpr std::uint64_t kShuffleTag = 0x5a1f;
constexpr std::uint64_t kProfileSeed = 2021;

void sort_channels(Times& t)
{
    for (std::size_t c = 0; c < kChannels; ++c) {
        auto first = t.begin() + static_cast<std::ptrdiff_t>(c * kSpikes);
        std::sort(first, first + kSpikes);
    }
}

}  // namespace

void StimulusProfile::validate() const
{
    if (!(deviation_bound > 0.0 && deviation_bound < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "profile: deviation_bound must lie in (0, 1)");
    }
    if (!(window > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "profile: window must be positive");
    }
    for (const auto& site : means) {
        for (const auto& channel : site) {
            for (double m : channel) {
                if (!(m > 0.0)) {
                    throw Error(ErrorCode::InvalidArgument, "profile: mean arrival times must be positive");
                }
            }
        }
    }
}

StimulusProfile default_profile()
{
    StimulusProfile p;
    Rng rng{kProfileSeed};
    for (std::size_t s = 0; s < kSites; ++s) {
        for (std::size_t c = 0; c < kChannels; ++c) {
            double t = 3.0 + 8.0 * static_cast<double>((c + kChannels - s) % kChannels);
            for (std::size_t k = 0; k < kSpikes; ++k) {
                p.means[s][c][k] = t;
                t += std::round(uniform(rng, 5.0, 6.0) * 10.0) / 10.0;
            }
        }
    }
    return p;
}

double quantize_level(double value, double step)
{
    return std::floor(value / step + 0.5) * step;
}

netmodel::Input normalize_quantize(const Times& times, double window, double step)
{
    netmodel::Input out{};
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < 0.0 || times[i] > window) {
            throw Error(ErrorCode::InvalidArgument, "normalize: arrival time outside the window");
        }
        out[i] = quantize_level(times[i] / window, step);
    }
    return out;
}

std::vector<RawPattern> synthesize_stimulus_raw(const StimulusProfile& profile,
                                                std::size_t count_per_site, std::uint64_t seed)
{
    profile.validate();
    std::vector<RawPattern> out;
    out.reserve(count_per_site * kSites);
    for (std::size_t s = 0; s < kSites; ++s) {
        for (std::size_t n = 0; n < count_per_site; ++n) {
            Rng rng = substream(seed, s * count_per_site + n, kStimulusTag);
            RawPattern raw;
            raw.label = static_cast<Label>(s);
            for (std::size_t c = 0; c < kChannels; ++c) {
                for (std::size_t k = 0; k < kSpikes; ++k) {
                    const double mean = profile.means[s][c][k];
                    const double t = mean * (1.0 + truncated_normal(rng, profile.deviation_bound));
                    raw.times[c * kSpikes + k] = std::min(t, profile.window);
                }
            }
            sort_channels(raw.times);
            out.push_back(raw);
        }
    }
    return out;
}

std::vector<SpikePattern> synthesize_stimulus_patterns(const StimulusProfile& profile,
                                                       std::size_t count_per_site,
                                                       std::uint64_t seed, double step)
{
    std::vector<SpikePattern> out;
    for (const auto& raw : synthesize_stimulus_raw(profile, count_per_site, seed)) {
        out.push_back({normalize_quantize(raw.times, profile.window, step), raw.label});
    }
    return out;
}

std::vector<RawPattern> synthesize_extraneous_raw(std::size_t count, double window,
                                                  std::uint64_t seed)
{
    std::vector<RawPattern> out;
    out.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
        Rng rng = substream(seed, n, kExtraneousTag);
        RawPattern raw;
        raw.label = Label::Sr;
        for (double& t : raw.times) {
            t = uniform(rng, 0.0, window);
        }
        sort_channels(raw.times);
        out.push_back(raw);
    }
    return out;
}

std::vector<SpikePattern> synthesize_extraneous(std::size_t count, double window,
                                                std::uint64_t seed, double step)
{
    std::vector<SpikePattern> out;
    for (const auto& raw : synthesize_extraneous_raw(count, window, seed)) {
        out.push_back({normalize_quantize(raw.times, window, step), raw.label});
    }
    return out;
}

ClassCounts count_labels(std::span<const SpikePattern> patterns) noexcept
{
    ClassCounts counts{};
    for (const auto& p : patterns) {
        ++counts[static_cast<std::size_t>(p.label)];
    }
    return counts;
}

DatasetSplit make_split(std::vector<SpikePattern> patterns, std::uint64_t seed,
                        const ClassCounts& train_counts, const ClassCounts& test_counts)
{
    const ClassCounts available = count_labels(patterns);
    for (std::size_t k = 0; k < netmodel::kLabelCount; ++k) {
        if (available[k] != train_counts[k] + test_counts[k]) {
            throw Error(ErrorCode::CountMismatch,
                        "split: class " + std::string(to_string(static_cast<Label>(k))) +
                            " has " + std::to_string(available[k]) + " patterns, expected " +
                            std::to_string(train_counts[k] + test_counts[k]));
        }
    }
    Rng rng = substream(seed, 0, kShuffleTag);
    std::shuffle(patterns.begin(), patterns.end(), rng);

    DatasetSplit split;
    for (auto& p : patterns) {
        const auto k = static_cast<std::size_t>(p.label);
        if (split.train_counts[k] < train_counts[k]) {
            ++split.train_counts[k];
            split.train.push_back(p);
        } else {
            ++split.test_counts[k];
            split.test.push_back(p);
        }
    }
    return split;
}

netmodel::Output target_vector(Label label) noexcept
{
    netmodel::Output y{-1.0, -1.0, -1.0, -1.0};
    if (label != Label::Sr) {
        y[static_cast<std::size_t>(label)] = 1.0;
    }
    return y;
}

DatasetSplit build_default_split(const StimulusProfile& profile, std::uint64_t seed, double step)
{
    auto patterns = synthesize_stimulus_patterns(profile, 1000, seed, step);
    auto extraneous = synthesize_extraneous(4000, profile.window, seed, step);
    patterns.insert(patterns.end(), extraneous.begin(), extraneous.end());
    return make_split(std::move(patterns), seed);
}

netmodel::TrainingSet to_training_set(std::span<const SpikePattern> patterns)
{
    netmodel::TrainingSet set;
    set.x.reserve(patterns.size());
    set.y.reserve(patterns.size());
    for (const auto& p : patterns) {
        set.x.push_back(p.values);
        set.y.push_back(target_vector(p.label));
    }
    return set;
}

std::vector<netmodel::Input> inputs_of(std::span<const SpikePattern> patterns)
{
    std::vector<netmodel::Input> out;
    out.reserve(patterns.size());
    for (const auto& p : patterns) {
        out.push_back(p.values);
    }
    return out;
}

std::vector<Label> labels_of(std::span<const SpikePattern> patterns)
{
    std::vector<Label> out;
    out.reserve(patterns.size());
    for (const auto& p : patterns) {
        out.push_back(p.label);
    }
    return out;
}

std::string to_csv(std::span<const SpikePattern> patterns)
{
    std::string out;
    for (std::size_t i = 0; i < netmodel::kInputs; ++i) {
        out += "x" + std::to_string(i) + ",";
    }
    out += "label\n";
    char buf[32];
    for (const auto& p : patterns) {
        for (double v : p.values) {
            std::snprintf(buf, sizeof buf, "%.17g,", v);
            out += buf;
        }
        out += to_string(p.label);
        out += '\n';
    }
    return out;
}

std::vector<SpikePattern> from_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(ErrorCode::IoError, "dataset CSV is empty");
    }
    std::vector<SpikePattern> out;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream row(line);
        std::string cell;
        SpikePattern p;
        for (std::size_t i = 0; i < netmodel::kInputs; ++i) {
            if (!std::getline(row, cell, ',')) {
                throw Error(ErrorCode::IoError, "dataset CSV row has too few columns");
            }
            try {
                p.values[i] = std::stod(cell);
            } catch (const std::exception&) {
                throw Error(ErrorCode::IoError, "dataset CSV: bad number '" + cell + "'");
            }
        }
        if (!std::getline(row, cell, ',')) {
            throw Error(ErrorCode::IoError, "dataset CSV row is missing the label");
        }
        p.label = netmodel::label_from_string(cell);
        out.push_back(p);
    }
    return out;
}

}  // namespace memxbar::dataset

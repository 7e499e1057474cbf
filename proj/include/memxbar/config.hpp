// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "memxbar/compile.hpp"
#include "memxbar/crossbar.hpp"
#include "memxbar/dataset.hpp"
#include "memxbar/device.hpp"
#include "memxbar/netmodel.hpp"
#include "memxbar/tolerance.hpp"

namespace memxbar::config {

struct TrainingOptions {
    netmodel::TrainConfig train;
    /// Independent restarts; the most robust one is kept.
    int restarts = 1;
    /// Monte Carlo trials used to rank restarts.
    std::size_t ranking_trials = 500;
};

struct AnalysisOptions {
    tolerance::ToleranceVector tolerances;
    std::size_t trials = 10000;
    double x_p = 5.0;
    tolerance::Percentiles percentiles;
};

/// Everything a pipeline run needs. Seeds never come from the clock.
struct RunConfig {
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = "run";
    /// Empty: the built-in default profile.
    std::filesystem::path profile;
    device::DeviceParams device;
    crossbar::CrossbarConfig crossbar;
    mapping::ResistanceRange range;
    mapping::InverseStrategy inverse;
    std::vector<mapping::StuckCell> stuck_cells;
    TrainingOptions training;
    AnalysisOptions analysis;
    tolerance::ExperimentPlan synthesis;
    tolerance::SweepConfig sweep;

    void validate() const;
};

/// Defaults used when a key is absent from the JSON document.
RunConfig default_config();

/// Parses a config document; relative paths resolve against `base_dir`.
/// Unknown keys and malformed values raise Error(ConfigError).
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of the effective configuration.
std::string config_json(const RunConfig& cfg);

/// FNV-1a 64 of the canonical JSON without output_dir, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

dataset::StimulusProfile parse_profile(const std::string& text);
std::string profile_json(const dataset::StimulusProfile& profile);

std::string params_json(const netmodel::MlpParams& params);
netmodel::MlpParams parse_params(const std::string& text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace memxbar::config

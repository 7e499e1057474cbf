// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "memxbar/config.hpp"

namespace memxbar::pipeline {

enum class Stage { Dataset, Train, Compile, Program, Analyze, Synthesize, Sweep, Report, All };

std::string_view to_string(Stage s) noexcept;
/// Raises Error(ConfigError) for unknown names.
Stage stage_from_string(std::string_view name);

struct RunOptions {
    /// Overrides analysis.trials when set.
    std::optional<std::size_t> trials;
    unsigned threads = 0;
    /// Raise an acceptance failure when the network misses X_p.
    bool enforce = false;
};

struct RunResult {
    std::vector<Stage> stages;
    /// Text of summary.json after the run.
    std::string summary;
    /// False only when `enforce` is set and the run misses X_p.
    bool accepted = true;
};

/// Runs one stage (or the whole chain). Every stage reads its inputs from
/// the run directory, so stages can be re-run individually.
RunResult run_pipeline(const config::RunConfig& cfg, Stage stage, const RunOptions& options = {});

/// Machine-readable description of a failure, written as error.json.
std::string error_json(std::string_view code, int exit_code, std::string_view message,
                       std::string_view stage);

}  // namespace memxbar::pipeline

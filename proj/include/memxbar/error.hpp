// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace memxbar {

enum class ErrorCode {
    InvalidArgument,
    AboveThreshold,
    AmplitudeOutOfRange,
    StuckDevice,
    ProgrammingFailed,
    InputOverrange,
    OddRowCount,
    BiasViolation,
    ShapeMismatch,
    NonFiniteLoss,
    WeightOutOfRange,
    NoPassingPoint,
    DegenerateNominal,
    CountMismatch,
    MissingArtifact,
    ConfigError,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every module reports contract violations through this exception type.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace memxbar

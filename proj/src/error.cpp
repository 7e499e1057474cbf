// SPDX-License-Identifier: Apache-2.0
#include "memxbar/error.hpp"

namespace memxbar {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::AboveThreshold: return "AboveThreshold";
    case ErrorCode::AmplitudeOutOfRange: return "AmplitudeOutOfRange";
    case ErrorCode::StuckDevice: return "StuckDevice";
    case ErrorCode::ProgrammingFailed: return "ProgrammingFailed";
    case ErrorCode::InputOverrange: return "InputOverrange";
    case ErrorCode::OddRowCount: return "OddRowCount";
    case ErrorCode::BiasViolation: return "BiasViolation";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::WeightOutOfRange: return "WeightOutOfRange";
    case ErrorCode::NoPassingPoint: return "NoPassingPoint";
    case ErrorCode::DegenerateNominal: return "DegenerateNominal";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace memxbar

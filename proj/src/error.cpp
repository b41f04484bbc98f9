#include "fdelab/error.hpp"

namespace fdelab {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidParameter: return "InvalidParameter";
        case ErrorCode::NonPositiveInput: return "NonPositiveInput";
        case ErrorCode::TimeBeyondExtinction: return "TimeBeyondExtinction";
        case ErrorCode::NonConvergent: return "NonConvergent";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::NoBracket: return "NoBracket";
        case ErrorCode::BlowupGuardTripped: return "BlowupGuardTripped";
        case ErrorCode::StepUnderflow: return "StepUnderflow";
        case ErrorCode::OutOfDomain: return "OutOfDomain";
        case ErrorCode::PositivityUnattained: return "PositivityUnattained";
        case ErrorCode::RecurrenceUnderdetermined: return "RecurrenceUnderdetermined";
        case ErrorCode::InsufficientTail: return "InsufficientTail";
        case ErrorCode::TargetBelowRange: return "TargetBelowRange";
        case ErrorCode::ExtrapolationUnstable: return "ExtrapolationUnstable";
        case ErrorCode::NoAdmissibleEpsilon: return "NoAdmissibleEpsilon";
        case ErrorCode::NonPositiveProfile: return "NonPositiveProfile";
        case ErrorCode::VerdictViolated: return "VerdictViolated";
        case ErrorCode::ThresholdSearchExhausted: return "ThresholdSearchExhausted";
        case ErrorCode::EpsilonOutOfRange: return "EpsilonOutOfRange";
        case ErrorCode::NewtonDiverged: return "NewtonDiverged";
        case ErrorCode::PositivityLost: return "PositivityLost";
        case ErrorCode::SandwichViolated: return "SandwichViolated";
        case ErrorCode::InsufficientDecades: return "InsufficientDecades";
        case ErrorCode::PreconditionViolated: return "PreconditionViolated";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

}  // namespace fdelab

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fdelab {

enum class ErrorCode {
    InvalidParameter,
    NonPositiveInput,
    TimeBeyondExtinction,
    NonConvergent,
    NonFinite,
    NoBracket,
    BlowupGuardTripped,
    StepUnderflow,
    OutOfDomain,
    PositivityUnattained,
    RecurrenceUnderdetermined,
    InsufficientTail,
    TargetBelowRange,
    ExtrapolationUnstable,
    NoAdmissibleEpsilon,
    NonPositiveProfile,
    VerdictViolated,
    ThresholdSearchExhausted,
    EpsilonOutOfRange,
    NewtonDiverged,
    PositivityLost,
    SandwichViolated,
    InsufficientDecades,
    PreconditionViolated,
    ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace fdelab

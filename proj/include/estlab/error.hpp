#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace estlab {

// Every failure the library reports maps to one of these codes. The C API
// forwards them as estlab_status values.
enum class ErrorCode {
    InvalidArgument,
    AllZero,
    NegativeWeight,
    InvalidDistribution,
    SupportMismatch,
    UnknownAxis,
    ZeroEvidence,
    AbsoluteContinuityViolated,
    ZeroDensity,
    DpiViolation,
    NotSufficient,
    SupportTooSmall,
    GridTooNarrow,
    NonNumericSupport,
    MissingOracle,
    EmptySample,
    ZeroL1Norm,
    NotBinary,
    OrderingViolation,
    PartitionIncomplete,
    DimensionMismatch,
    Diverged,
    MissingAdmissibilityConstants,
    UnknownExperiment,
    InvalidOverride,
    InvalidConfig,
    Io,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace estlab

#pragma once

#include <stdexcept>
#include <string>

namespace dynarisk {

enum class ErrorCode {
    NonTreeShape,
    ProbNotNormalized,
    ZeroProbabilityNode,
    HorizonMismatch,
    TreeMismatch,
    AnchorMismatch,
    WindowOrderViolation,
    WindowViolation,
    NotAntichain,
    NotAntichainSubset,
    NotADensity,
    NonPositiveDensity,
    BadWeights,
    EmptyScenarioSet,
    NormalizationViolation,
    EnumerationCapExceeded,
    SubsetEnumerationCapExceeded,
    DimensionMismatch,
    LPFailure,
    NotAccepted,
    InputNotConsistent,
    FixtureParseError,
    UsageError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + what), m_code(code) {}

    ErrorCode code() const { return m_code; }

private:
    ErrorCode m_code;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) fail(code, what);
}

} // namespace dynarisk

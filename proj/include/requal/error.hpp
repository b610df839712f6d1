#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace requal {

enum class ErrorKind {
    DimensionMismatch,
    LengthMismatch,
    ZeroNormVector,
    NonFiniteValue,
    EmptySampleSet,
    DegenerateCentroid,
    InsufficientSamples,
    EmptySeedSet,
    SignedModeRequiresBinaryGroups,
    InvalidGroupSet,
    BudgetBelowSingleQuery,
    OutOfDomain,
    InvalidTokenProbability,
    InvalidPlan,
    InvalidTask,
    RetryExhausted,
    InvalidOutput,
    ProviderUnavailable,
    Timeout,
    HttpStatus,
    MalformedResponse,
    UnknownText,
    InvalidDistribution,
    UnknownEntityGender,
    DivisionByZeroMales,
    InvalidLexicon,
    ConfigError,
    IoError,
    ParseError,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::ZeroNormVector: return "ZeroNormVector";
        case ErrorKind::NonFiniteValue: return "NonFiniteValue";
        case ErrorKind::EmptySampleSet: return "EmptySampleSet";
        case ErrorKind::DegenerateCentroid: return "DegenerateCentroid";
        case ErrorKind::InsufficientSamples: return "InsufficientSamples";
        case ErrorKind::EmptySeedSet: return "EmptySeedSet";
        case ErrorKind::SignedModeRequiresBinaryGroups: return "SignedModeRequiresBinaryGroups";
        case ErrorKind::InvalidGroupSet: return "InvalidGroupSet";
        case ErrorKind::BudgetBelowSingleQuery: return "BudgetBelowSingleQuery";
        case ErrorKind::OutOfDomain: return "OutOfDomain";
        case ErrorKind::InvalidTokenProbability: return "InvalidTokenProbability";
        case ErrorKind::InvalidPlan: return "InvalidPlan";
        case ErrorKind::InvalidTask: return "InvalidTask";
        case ErrorKind::RetryExhausted: return "RetryExhausted";
        case ErrorKind::InvalidOutput: return "InvalidOutput";
        case ErrorKind::ProviderUnavailable: return "ProviderUnavailable";
        case ErrorKind::Timeout: return "Timeout";
        case ErrorKind::HttpStatus: return "HttpStatus";
        case ErrorKind::MalformedResponse: return "MalformedResponse";
        case ErrorKind::UnknownText: return "UnknownText";
        case ErrorKind::InvalidDistribution: return "InvalidDistribution";
        case ErrorKind::UnknownEntityGender: return "UnknownEntityGender";
        case ErrorKind::DivisionByZeroMales: return "DivisionByZeroMales";
        case ErrorKind::InvalidLexicon: return "InvalidLexicon";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::ParseError: return "ParseError";
    }
    return "Unknown";
}

/// Single exception type for the library; callers switch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, int status = 0)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message),
          kind_(kind),
          status_(status) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

    /// HTTP status code for HttpStatus / ProviderUnavailable errors, 0 otherwise.
    [[nodiscard]] int status() const noexcept { return status_; }

    [[nodiscard]] bool is_provider_error() const noexcept {
        return kind_ == ErrorKind::ProviderUnavailable || kind_ == ErrorKind::Timeout ||
               kind_ == ErrorKind::HttpStatus || kind_ == ErrorKind::MalformedResponse;
    }

private:
    ErrorKind kind_;
    int status_;
};

}  // namespace requal

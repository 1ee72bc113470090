#pragma once

#include <stdexcept>
#include <string>

namespace cornet {

enum class ErrorCode {
    InvalidArgument,
    ShapeMismatch,
    DimensionMismatch,
    InvalidDimension,
    NotSymmetric,
    NotPositiveDefinite,
    NonPositiveDiagonal,
    NotCorrelation,
    BadDiagonal,
    SingularFactor,
    SingularMatrix,
    SingularH0,
    NoConvergence,
    DampingFailure,
    Unsupported,
    InfeasibleSeparation,
    ConfigError,
    IoError,
};

// Broad families used by the C API and the CLI exit codes.
enum class ErrorFamily { Usage, Numerical, Io };

const char* error_code_name(ErrorCode code);
ErrorFamily error_family(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace cornet

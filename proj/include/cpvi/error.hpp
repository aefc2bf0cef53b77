#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cpvi {

enum class ErrorCode {
    NonNormalizable,
    TemperatureZero,
    EmptyEnsemble,
    DegenerateParameters,
    NonPositiveVariance,
    NumericalBlowup,
    TooFewParticles,
    DegenerateSpread,
    SizeMismatch,
    HorizonTooShort,
    EmptyInput,
    DegenerateGap,
    ModeMismatch,
    KappaEqualsBeta,
    InvalidArgument,
    InvalidConfig,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI) can react to the category without parsing text.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }
    /// Message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace cpvi

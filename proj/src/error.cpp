#include "cpvi/error.hpp"

namespace cpvi {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonNormalizable: return "NonNormalizable";
        case ErrorCode::TemperatureZero: return "TemperatureZero";
        case ErrorCode::EmptyEnsemble: return "EmptyEnsemble";
        case ErrorCode::DegenerateParameters: return "DegenerateParameters";
        case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
        case ErrorCode::NumericalBlowup: return "NumericalBlowup";
        case ErrorCode::TooFewParticles: return "TooFewParticles";
        case ErrorCode::DegenerateSpread: return "DegenerateSpread";
        case ErrorCode::SizeMismatch: return "SizeMismatch";
        case ErrorCode::HorizonTooShort: return "HorizonTooShort";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::DegenerateGap: return "DegenerateGap";
        case ErrorCode::ModeMismatch: return "ModeMismatch";
        case ErrorCode::KappaEqualsBeta: return "KappaEqualsBeta";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace cpvi

#pragma once
// Error type shared by all modules. Each failure carries a stable code name
// so the CLI and tests can match on it.

#include <stdexcept>
#include <string>

namespace gkps {

enum class Errc {
    NonSquare,
    OddDimension,
    NotSymplectic,
    RadiusTooLarge,
    SingularBasis,
    RejectionBudgetExceeded,
    NonPositiveBeta,
    InadmissibleCovariance,
    DimensionMismatch,
    QuadratureNotConverged,
    NotInCell,
    ImaginaryResidualTooLarge,
    NegativeBeyondTail,
    DegreeCap,
    CutoffTooSmall,
    DegenerateTopEigenvalue,
    MassDeficit,
    NegativeDensity,
    EmptyInput,
    DensityNegative,
    PeriodMismatch,
    NotFactorizable,
    SchemaError,
    InvalidArgument,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::NonSquare: return "NonSquare";
        case Errc::OddDimension: return "OddDimension";
        case Errc::NotSymplectic: return "NotSymplectic";
        case Errc::RadiusTooLarge: return "RadiusTooLarge";
        case Errc::SingularBasis: return "SingularBasis";
        case Errc::RejectionBudgetExceeded: return "RejectionBudgetExceeded";
        case Errc::NonPositiveBeta: return "NonPositiveBeta";
        case Errc::InadmissibleCovariance: return "InadmissibleCovariance";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::QuadratureNotConverged: return "QuadratureNotConverged";
        case Errc::NotInCell: return "NotInCell";
        case Errc::ImaginaryResidualTooLarge: return "ImaginaryResidualTooLarge";
        case Errc::NegativeBeyondTail: return "NegativeBeyondTail";
        case Errc::DegreeCap: return "DegreeCap";
        case Errc::CutoffTooSmall: return "CutoffTooSmall";
        case Errc::DegenerateTopEigenvalue: return "DegenerateTopEigenvalue";
        case Errc::MassDeficit: return "MassDeficit";
        case Errc::NegativeDensity: return "NegativeDensity";
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::DensityNegative: return "DensityNegative";
        case Errc::PeriodMismatch: return "PeriodMismatch";
        case Errc::NotFactorizable: return "NotFactorizable";
        case Errc::SchemaError: return "SchemaError";
        case Errc::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace gkps

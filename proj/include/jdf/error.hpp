#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace jdf {

enum class ErrorCode {
    // engine
    MissingBinding,
    UnknownInput,
    ShapeMismatch,
    DTypeMismatch,
    NonScalarOutput,
    NonRealOutput,
    AxisOutOfRange,
    EvenKernel,
    NonDifferentiableGraph,
    InvalidArgument,
    // geometry / discretization
    InvalidDomain,
    PointDimensionMismatch,
    NoGrid,
    // operators
    UnknownFieldName,
    IncompatibleFamilies,
    UnsupportedNodeForFamily,
    ComponentMismatch,
    NotFourier,
    AccuracyTooHighForGrid,
    FamilyMismatch,
    ParamShapeConflict,
    // solvers
    NaNEncountered,
    AdjointUnavailable,
    NonEndomorphicOperator,
    // problems
    RegionOutOfBounds,
    // io
    BadMagic,
    Truncated,
    UnsupportedVersion,
    IoFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

} // namespace jdf

#pragma once

#include <stdexcept>
#include <string>

namespace mapmom {

// Base type for everything this library throws.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Model input / construction
struct SchemaError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };
struct ReducibleChainError : Error { using Error::Error; };
struct UnsupportedLawError : Error { using Error::Error; };

// Linear algebra kernels
struct NonSquareError : Error { using Error::Error; };
struct DimensionError : Error { using Error::Error; };
struct SingularMatrixError : Error { using Error::Error; };
struct SingularSystemError : Error { using Error::Error; };
struct ConvergenceError : Error { using Error::Error; };

// Moment calculus
struct DivergentMomentError : Error { using Error::Error; };
struct PreconditionError : Error { using Error::Error; };

}  // namespace mapmom

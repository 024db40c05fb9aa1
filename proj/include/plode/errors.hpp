#pragma once

#include <stdexcept>
#include <string>

namespace plode {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A state vector or model entry is NaN/inf.
class InvalidStateError : public Error {
public:
    using Error::Error;
};

// Mismatched vector/matrix dimensions.
class DimensionError : public Error {
public:
    using Error::Error;
};

// A computation produced non-finite intermediates.
class OverflowError : public Error {
public:
    using Error::Error;
};

// A matrix that must be invertible is numerically singular.
class SingularMatrixError : public Error {
public:
    using Error::Error;
};

// A verified identity (round trip, formula agreement) missed its tolerance.
class AccuracyError : public Error {
public:
    using Error::Error;
};

// int_0^T exp(At) dt is singular: some eigenvalue satisfies lambda*T in 2*pi*i*Z\{0}.
class IntegralSingularError : public Error {
public:
    using Error::Error;
};

// A region's system cannot be converted (precondition failure).
class NotConvertibleError : public Error {
public:
    using Error::Error;
};

// Enumeration/grid/event caps.
class CapExceededError : public Error {
public:
    using Error::Error;
};

// Malformed input files.
class ParseError : public Error {
public:
    using Error::Error;
};

} // namespace plode

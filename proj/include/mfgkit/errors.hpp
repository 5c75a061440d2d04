#pragma once

#include <stdexcept>
#include <string>

namespace mfgkit {

// Base class for all toolkit errors. Subclasses carry the failure's name so
// callers can dispatch on type while the CLI surfaces the message verbatim.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyInput : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};
struct NonFiniteCoordinate : Error {
    using Error::Error;
};
struct SizeMismatch : Error {
    using Error::Error;
};
struct TooLargeForExactAssignment : Error {
    using Error::Error;
};
struct UnsupportedOrder : Error {
    using Error::Error;
};
struct NoConvergence : Error {
    using Error::Error;
};
struct UnknownModel : Error {
    using Error::Error;
};
struct ParamOutOfRange : Error {
    using Error::Error;
};
struct SingularHessian : Error {
    using Error::Error;
};
struct DomainTooSmall : Error {
    using Error::Error;
};
struct NonConvergentLineSearch : Error {
    using Error::Error;
};
struct BlowUp : Error {
    using Error::Error;
};
struct ShootingDiverged : Error {
    using Error::Error;
};
struct ConfigInvalid : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

}  // namespace mfgkit

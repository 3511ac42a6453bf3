#ifndef TTOBS_ERRORS_HPP
#define TTOBS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ttobs {

// Error taxonomy shared with the CLI exit codes (see tools/main.cpp).
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : Error {
    using Error::Error;
};
struct DimensionError : Error {
    using Error::Error;
};
struct PovmError : Error {
    using Error::Error;
};
struct PreconditionError : Error {
    using Error::Error;
};
struct CoverageError : Error {
    using Error::Error;
};
struct TruncationError : Error {
    using Error::Error;
};
struct InstanceTooLargeError : Error {
    using Error::Error;
};
struct NumericalError : Error {
    using Error::Error;
};
// Internal consistency assertion (double assignment of a free variable,
// corrupted certificate fields). Firing one is a bug signal.
struct ConflictError : Error {
    using Error::Error;
};

}  // namespace ttobs

#endif

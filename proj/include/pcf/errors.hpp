#pragma once
#include <stdexcept>
#include <string>

namespace pcf {

// Bad input or configuration. CLI exit code 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Precondition of an operation violated by otherwise well-formed data.
struct PreconditionError : ValidationError {
    double residual = 0;
    PreconditionError(const std::string& msg, double r) : ValidationError(msg), residual(r) {}
};

// Degenerate metric, loss of positivity, curvature blowup. CLI exit code 3.
struct SingularityError : std::runtime_error {
    long location = -1;
    double time = 0;
    SingularityError(const std::string& msg, long loc = -1, double t = 0)
        : std::runtime_error(msg), location(loc), time(t) {}
};

struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace pcf

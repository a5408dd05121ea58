#pragma once

/**
 * common.hpp — shared aliases and error types for the operator-space toolkit.
 *
 * Error taxonomy used across the library:
 *   - invalid_input:     a precondition on caller-supplied data is violated
 *                        (dependent basis, shape mismatch between compatible
 *                        objects, non-parallel pair, ...). The message names
 *                        the operation and the offending field.
 *   - unsupported_input: the request is well-formed but outside what the
 *                        numerics can certify (e.g. cb-norm truncation for an
 *                        abstract codomain without an explicit level).
 *   - parse_error:       malformed serialized input.
 *   - shape_error:       structurally valid input whose dimensions do not fit
 *                        the operation.
 */

#include <complex>
#include <cstdlib>
#include <iostream>
#include <stdexcept>
#include <string>

namespace opspace {

using cplx = std::complex<double>;

/// Diagnostics are silent unless the OPSPACE_LOG environment variable is set
/// to a non-empty value.
inline bool log_enabled() {
    static const bool on = [] {
        const char* v = std::getenv("OPSPACE_LOG");
        return v != nullptr && *v != '\0';
    }();
    return on;
}

inline void log_note(const std::string& msg) {
    if (log_enabled()) std::cerr << "[opspace] " << msg << '\n';
}

struct invalid_input : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct unsupported_input : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct parse_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct shape_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace opspace

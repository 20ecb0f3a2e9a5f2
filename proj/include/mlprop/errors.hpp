#ifndef MLPROP_ERRORS_HPP
#define MLPROP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mlprop {

// Base class for all library errors.
struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or unreadable files (bad magic, truncation, size mismatch).
struct io_error : error {
    explicit io_error(const std::string& msg) : error(msg) {}
};

// Violated preconditions and invalid configuration.
struct validation_error : error {
    explicit validation_error(const std::string& msg) : error(msg) {}
};

// Numerical failures (quadrature non-convergence, empty cones, ...).
struct numeric_error : error {
    explicit numeric_error(const std::string& msg) : error(msg) {}
};

} // namespace mlprop

#endif

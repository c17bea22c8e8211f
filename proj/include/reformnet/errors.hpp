#pragma once

#include <stdexcept>
#include <string>

namespace reformnet {

// Non-finite entries fed to an operation that requires finite input.
class InvalidInputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Matrix dimensions incompatible with the requested operation.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Symmetric input with an eigenvalue below the negative tolerance.
class NotPsdError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A representation or covariance chain violates its image constraint.
class ConstraintError : public std::runtime_error {
public:
    ConstraintError(int layer, const std::string& what)
        : std::runtime_error(what), layer(layer) {}
    int layer;
};

// Training loss crossed the divergence threshold.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int step, const std::string& what)
        : std::runtime_error(what), step(step) {}
    int step;
};

} // namespace reformnet

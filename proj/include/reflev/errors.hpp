#pragma once

#include <stdexcept>
#include <string>

namespace reflev {

/// Argument outside the domain where a quantity is defined (e.g. alpha outside Theta).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The Laplace exponent has no positive zero.
class NoRootError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid model, barrier or run configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure during simulation (non-finite accumulator).
class OverflowError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Not enough usable data points for a fit, or an empty histogram.
class InsufficientDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace reflev

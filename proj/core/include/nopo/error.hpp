#pragma once

#include <stdexcept>
#include <string>

namespace nopo {

/// Rejected input: parameters, configuration, preconditions.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Integration blow-up, norm collapse, failed root bracketing.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fock truncation too small for the state being represented.
class TruncationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace nopo

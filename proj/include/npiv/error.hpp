#pragma once

#include <stdexcept>
#include <string>

namespace npiv {

/// Raised for malformed or out-of-domain inputs (CLI exit code 2).
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a numerical routine fails to converge or meets a singular
/// system it cannot handle (CLI exit code 3).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace npiv

#pragma once

#include <stdexcept>

namespace qnetopt {

// Bad model description, malformed input file, out-of-range argument.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure on a well-formed problem: divergence, no consistent
// stationary solution, iteration cap hit. The CLI maps this to exit code 3.
class SolveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace qnetopt

#pragma once

#include <stdexcept>

namespace duplexsim {

// Input files, schemas, or argument combinations that fail validation.
// The CLI maps this (and std::invalid_argument) to exit code 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Target sequence cannot be aligned into the requested number of frames.
// CLI exit code 3.
struct InfeasibleAlignmentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A sequence model returned something other than a normalized log
// distribution of the declared size. CLI exit code 4.
struct ModelContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace duplexsim

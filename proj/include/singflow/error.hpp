#pragma once

#include <stdexcept>
#include <string>

namespace singflow {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Violated operation precondition (caller bug or bad input data).
struct PreconditionError : Error {
    using Error::Error;
};

// A numerical stage ran but failed to converge / produce a usable result.
struct NumericalError : Error {
    using Error::Error;
};

}  // namespace singflow

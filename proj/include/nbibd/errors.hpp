#pragma once

#include <stdexcept>
#include <string>

namespace nbibd {

// Malformed file content or out-of-range arguments. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// NB1 generation ran out of full restarts without placing every block under lambda <= 1.
class Nb1InfeasibleBudget : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Normal equations are rank deficient beyond the sum-to-zero constraints.
class DisconnectedDesign : public FitError {
public:
    using FitError::FitError;
};

class SingularFit : public FitError {
public:
    using FitError::FitError;
};

}  // namespace nbibd

#pragma once

#include <stdexcept>
#include <string>

namespace churnsim {

// Violated precondition on caller-supplied data.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Input is well-formed but statistically degenerate (e.g. zero variance).
class DegenerateData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A broken internal guarantee: attempt cap hit, covariance lost definiteness.
class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class AttemptCapExceeded : public InternalError {
public:
    using InternalError::InternalError;
};

namespace detail {

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw InvalidArgument(msg);
}

} // namespace detail
} // namespace churnsim

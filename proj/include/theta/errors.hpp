#pragma once

#include <stdexcept>
#include <string>

namespace theta {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration, shape mismatch, bad architecture.
class ConfigError : public Error {
public:
    using Error::Error;
};

// NaN/Inf produced by an operation, or an overflowing importance ratio.
class NumericError : public Error {
public:
    using Error::Error;
};

// API misuse: backward on a non-scalar, optimizer step without gradients.
class UsageError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

// An environment failed in a way that is not an anomaly (evaluator died,
// handshake refused). Aborts the run.
class EnvironmentFailure : public Error {
public:
    using Error::Error;
};

}  // namespace theta

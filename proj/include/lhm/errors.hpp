#pragma once

#include <stdexcept>
#include <string>

namespace lhm {

// Base for all library errors. Callers that only care about "something in
// the estimator pipeline went wrong" can catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class NonFiniteError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

} // namespace lhm

#pragma once

#include <stdexcept>
#include <string>

namespace gedmd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or non-finite input (shapes, NaN, missing fields).
class InputError : public Error {
public:
    using Error::Error;
};

/// Point outside the domain of a bounded basis.
class DomainError : public Error {
public:
    using Error::Error;
};

/// The dictionary cannot provide what was asked (e.g. coordinate functions).
class UnsupportedDictionary : public Error {
public:
    using Error::Error;
};

/// Trajectory integration produced a non-finite state.
class IntegrationError : public Error {
public:
    explicit IntegrationError(const std::string& what, long step)
        : Error(what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

/// Product functions needed for diffusion identification are outside span(psi).
class ClosureError : public Error {
public:
    using Error::Error;
};

/// Identified diffusion is too indefinite to be repaired by clipping.
class IdentificationQualityError : public Error {
public:
    using Error::Error;
};

class OptimizationError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace gedmd

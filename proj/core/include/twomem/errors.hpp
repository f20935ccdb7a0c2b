#pragma once

#include <array>
#include <stdexcept>
#include <string>

namespace twomem {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Evaluation outside the domain of the interference formulas (|F| > 1,
/// vanishing denominators, invalid parameters).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Raised by the integrators when a state component stops being finite.
class NonFiniteError : public Error {
public:
    NonFiniteError(double t, std::array<double, 6> state);

    double time() const noexcept { return time_; }
    const std::array<double, 6>& state() const noexcept { return state_; }

private:
    double time_;
    std::array<double, 6> state_;
};

class SamplingTooCoarse : public Error {
public:
    using Error::Error;
};

/// Covariance matrix violates the uncertainty relation beyond numerical noise.
class NonPhysicalError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

class EnsembleAborted : public Error {
public:
    using Error::Error;
};

}  // namespace twomem

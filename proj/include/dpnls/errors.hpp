#pragma once

#include <stdexcept>
#include <string>

namespace dpnls {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A norm or integral diverges (e.g. an algebraic r^{-1} tail with q <= 3).
class NonIntegrable : public Error {
public:
    using Error::Error;
};

/// Adaptive step shrank below round-off, or the state became NaN/infinite.
class IntegrationFailure : public Error {
public:
    IntegrationFailure(const std::string& what, double radius)
        : Error(what + " at r=" + std::to_string(radius)), radius_(radius) {}
    double radius() const noexcept { return radius_; }

private:
    double radius_;
};

/// Series start failed its verification step.
class SeriesStartError : public Error {
public:
    using Error::Error;
};

class BracketNotFound : public Error {
public:
    using Error::Error;
};

/// Bisection converged without producing a decaying trajectory, or hit an Undecided outcome.
class BisectionFailure : public Error {
public:
    using Error::Error;
};

/// Two independent eigenvalue counters disagree.
class CounterMismatch : public Error {
public:
    CounterMismatch(int oscillation, int inertia)
        : Error("negative-eigenvalue counters disagree: oscillation=" + std::to_string(oscillation) +
                " inertia=" + std::to_string(inertia)),
          oscillation_(oscillation), inertia_(inertia) {}
    int oscillation() const noexcept { return oscillation_; }
    int inertia() const noexcept { return inertia_; }

private:
    int oscillation_;
    int inertia_;
};

class ConvergenceFailure : public Error {
public:
    using Error::Error;
};

}  // namespace dpnls

#pragma once

#include <stdexcept>
#include <string>

namespace delayvib {

// Base of every failure raised by the library. Callers that only care about
// "something numerical went wrong" can catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input violates a documented precondition (bad masses, inconsistent dims...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class InsufficientParameters : public Error {
public:
    using Error::Error;
};

// The bordered matrix R(omega, K_L) could not be factored.
class RSingular : public Error {
public:
    using Error::Error;
};

class PSingular : public Error {
public:
    using Error::Error;
};

class PIllConditioned : public PSingular {
public:
    PIllConditioned(const std::string& what, double condition)
        : PSingular(what), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

// s is (numerically) a characteristic root, so M(s) cannot be inverted.
class SingularAtS : public Error {
public:
    using Error::Error;
};

class DiscretizationTooCoarse : public Error {
public:
    using Error::Error;
};

class EmptyRegion : public Error {
public:
    using Error::Error;
};

// Rightmost root is not unique; alpha is not differentiable here.
class NonSmoothPoint : public Error {
public:
    using Error::Error;
};

class InstabilityDetected : public Error {
public:
    InstabilityDetected(const std::string& what, double time)
        : Error(what), time_(time) {}
    double blow_up_time() const noexcept { return time_; }

private:
    double time_;
};

class WindowTooShort : public Error {
public:
    using Error::Error;
};

} // namespace delayvib

#pragma once

#include <stdexcept>
#include <string>

namespace gail {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class IndexOutOfRange : public Error {
public:
    using Error::Error;
};

/// Power iteration did not converge, or two starts reached different fixed points.
class NonErgodicChain : public Error {
public:
    using Error::Error;
};

/// The augmented Poisson system has a null space larger than expected.
class SingularSystem : public Error {
public:
    using Error::Error;
};

class ChainMismatch : public Error {
public:
    using Error::Error;
};

class BallViolation : public Error {
public:
    using Error::Error;
};

class InsufficientHistory : public Error {
public:
    using Error::Error;
};

class InfeasibleConstants : public Error {
public:
    using Error::Error;
};

class TrajectoryTooShort : public Error {
public:
    TrajectoryTooShort(const std::string& what, long long min_length)
        : Error(what), min_length_(min_length) {}
    long long min_length() const noexcept { return min_length_; }

private:
    long long min_length_;
};

class MissingExpert : public Error {
public:
    using Error::Error;
};

/// Malformed structured-text, CSV or config input.
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace gail

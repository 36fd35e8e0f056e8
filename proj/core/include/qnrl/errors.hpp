#pragma once

#include <stdexcept>
#include <string>

namespace qnrl {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dimension mismatch, out-of-range argument, malformed input.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Request outside the supported envelope (e.g. a dense oracle that is too large).
class Unsupported : public Error {
public:
    using Error::Error;
};

class NotDescentDirection : public Error {
public:
    using Error::Error;
};

class LineSearchFailure : public Error {
public:
    using Error::Error;
};

class InvalidTransition : public Error {
public:
    using Error::Error;
};

/// Non-finite loss or gradient, or an iterate that ran away.
class Diverged : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace qnrl

#pragma once

#include <stdexcept>
#include <string>

namespace fuselens {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed, truncated or unreadable files.
class FormatError : public Error {
public:
    using Error::Error;
};

// A value or combination of values violates a domain invariant
// (shape mismatch, non-finite entry, zero norm, out-of-range weight...).
class InvariantError : public Error {
public:
    using Error::Error;
};

}  // namespace fuselens

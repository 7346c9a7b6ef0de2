#pragma once

#include <stdexcept>
#include <string>

namespace atl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor extents disagree with what an operation requires.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A NaN or Inf appeared in an activation, gradient or loss.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value (layer spec, AT config, train config, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed, truncated or otherwise unreadable file.
class FormatError : public Error {
public:
    using Error::Error;
};

/// File written by an incompatible container version.
class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Two networks whose conv stacks cannot be paired (WI source, AT extractor).
class CompatibilityError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace atl

#pragma once

#include <stdexcept>
#include <string>

namespace firmscan {

/// Base class for all firmscan errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem or network I/O failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed input file (manifest, dictionary, feed, CPE string, ...).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Fetched bytes do not hash to the recorded checksum.
class IntegrityError : public Error {
public:
    using Error::Error;
};

/// Transfer-level failure while fetching a firmware image.
class FetchError : public Error {
public:
    using Error::Error;
};

/// URL scheme outside the supported set (file, http, https).
class UnsupportedSchemeError : public Error {
public:
    using Error::Error;
};

/// Mathematical precondition violated (e.g. entropy of an empty window).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Library has no entry in the release index.
class NotIndexedError : public Error {
public:
    using Error::Error;
};

/// A record lacks a date required for delay computation.
class IncompleteRecordError : public Error {
public:
    using Error::Error;
};

/// Invalid pipeline configuration, reported before any work starts.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace firmscan

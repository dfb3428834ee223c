#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dalr {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-conformable shapes.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Requested rank outside [1, min(m, n)].
class RankError : public Error {
public:
    using Error::Error;
};

/// A count or index argument outside its allowed range.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Empty or malformed activation batch.
class BatchError : public Error {
public:
    using Error::Error;
};

/// Iterative decomposition did not converge.
class DecompositionError : public Error {
public:
    using Error::Error;
};

/// Linear system is not (numerically) positive definite.
class SingularSystemError : public Error {
public:
    using Error::Error;
};

/// NaN or Inf produced or encountered.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Bad input to a command-line invocation or config.
class UsageError : public Error {
public:
    using Error::Error;
};

enum class FormatErrorCode {
    BadMagic,
    BadVersion,
    BadDtype,
    Truncated,
    NonFinite,
    TrailingData,
    Io,
    Manifest,
};

inline const char* to_string(FormatErrorCode code)
{
    switch (code) {
    case FormatErrorCode::BadMagic: return "bad-magic";
    case FormatErrorCode::BadVersion: return "bad-version";
    case FormatErrorCode::BadDtype: return "bad-dtype";
    case FormatErrorCode::Truncated: return "truncated";
    case FormatErrorCode::NonFinite: return "non-finite";
    case FormatErrorCode::TrailingData: return "trailing-data";
    case FormatErrorCode::Io: return "io";
    case FormatErrorCode::Manifest: return "manifest";
    }
    return "unknown";
}

/// File-format violation. Carries the byte offset where it was detected.
class FormatError : public Error {
public:
    FormatError(FormatErrorCode code, std::uint64_t offset, const std::string& what)
        : Error(std::string(to_string(code)) + " at byte offset " + std::to_string(offset) + ": " + what)
        , code_(code)
        , offset_(offset)
    {
    }

    FormatErrorCode code() const noexcept { return code_; }
    std::uint64_t offset() const noexcept { return offset_; }

private:
    FormatErrorCode code_;
    std::uint64_t offset_;
};

} // namespace dalr

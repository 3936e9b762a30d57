#pragma once

#include <stdexcept>
#include <string>

namespace hafno {

/// Failure classes. The CLI maps each to a fixed process exit code.
enum class ErrorKind {
    usage = 2,
    generation = 3,
    divergence = 4,
    mismatch = 5,
    missing_file = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Binary file decoding failures, one code per failure mode.
enum class FormatErrorCode { bad_magic = 1, version_mismatch, truncated, checksum_mismatch, malformed };

class FormatError : public Error {
public:
    FormatError(FormatErrorCode code, const std::string& what)
        : Error(ErrorKind::mismatch, what),
          code_(code) {}
    FormatErrorCode code() const noexcept { return code_; }

private:
    FormatErrorCode code_;
};

}  // namespace hafno

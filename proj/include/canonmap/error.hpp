#pragma once

#include <stdexcept>
#include <string>

namespace canonmap {

enum class ErrorKind {
    Parse,
    NonTriangularFace,
    InvalidIndex,
    DegenerateFace,
    NonManifold,
    Disconnected,
    NoConvergence,
    LinearSolve,
    InvalidArgument,
    BadMagic,
    Truncated,
    EmptyForeground,
    DimensionMismatch,
    MissingInput,
    NonFinite,
    HashMismatch,
    Io,
};

const char* to_string(ErrorKind kind);

// All library failures surface as this exception; `kind()` lets callers
// (and the CLI exit-code mapping) distinguish them without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace canonmap

#include "canonmap/error.hpp"

namespace canonmap {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Parse: return "parse error";
        case ErrorKind::NonTriangularFace: return "non-triangular face";
        case ErrorKind::InvalidIndex: return "invalid index";
        case ErrorKind::DegenerateFace: return "degenerate face";
        case ErrorKind::NonManifold: return "non-manifold topology";
        case ErrorKind::Disconnected: return "disconnected mesh";
        case ErrorKind::NoConvergence: return "eigensolver did not converge";
        case ErrorKind::LinearSolve: return "linear solve failed";
        case ErrorKind::InvalidArgument: return "invalid argument";
        case ErrorKind::BadMagic: return "bad magic";
        case ErrorKind::Truncated: return "truncated payload";
        case ErrorKind::EmptyForeground: return "empty foreground";
        case ErrorKind::DimensionMismatch: return "dimension mismatch";
        case ErrorKind::MissingInput: return "missing input";
        case ErrorKind::NonFinite: return "non-finite value";
        case ErrorKind::HashMismatch: return "hash mismatch";
        case ErrorKind::Io: return "i/o error";
    }
    return "unknown error";
}

}  // namespace canonmap

#pragma once

#include <stdexcept>
#include <string>

namespace retro {

enum class ErrorKind {
    SyntaxError,
    UnresolvedName,
    UnsupportedFeature,
    DuplicateName,
    DropMissing,
    MalformedLine,
    NonMonotonicIndex,
    WindowOutOfRange,
    TargetKindMismatch,
    SchemaMismatch,
    LedgerGap,
    NoSnapshot,
    NondetExhausted,
    SpecError,
    MissingArtifacts,
    VerifyMismatch,
    Internal,
};

const char *errorKindName(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::string(errorKindName(kind)) + ": " + message),
          _kind(kind) {}

    ErrorKind kind() const { return _kind; }

private:
    ErrorKind _kind;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string &message) {
    throw Error(kind, message);
}

} // namespace retro

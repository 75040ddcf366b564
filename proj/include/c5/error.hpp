#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace c5 {

enum class ErrorKind {
    InvalidInput,
    NotFound,
    Transient,
    Unsupported,
    Corrupt,
    Parse,
    Storage,
};

const char *to_string(ErrorKind kind);

class Error : public std::runtime_error {
   public:
    Error(ErrorKind kind, const std::string &message)
        : std::runtime_error(message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

   private:
    ErrorKind kind_;
};

/// Malformed WARC framing. `offset()` is the byte position in the
/// decompressed stream where the problem was detected.
class ParseError : public Error {
   public:
    ParseError(std::uint64_t offset, const std::string &message)
        : Error(ErrorKind::Parse, message + " at byte " + std::to_string(offset)), offset_(offset) {}

    [[nodiscard]] std::uint64_t offset() const noexcept { return offset_; }

   private:
    std::uint64_t offset_;
};

inline const char *to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidInput: return "InvalidInput";
        case ErrorKind::NotFound: return "NotFound";
        case ErrorKind::Transient: return "Transient";
        case ErrorKind::Unsupported: return "Unsupported";
        case ErrorKind::Corrupt: return "Corrupt";
        case ErrorKind::Parse: return "ParseError";
        case ErrorKind::Storage: return "StorageError";
    }
    return "Unknown";
}

}  // namespace c5

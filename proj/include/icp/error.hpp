#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace icp {

enum class ErrorCode {
    // pimage codec
    UnsupportedFormat,
    TruncatedInput,
    BadHeader,
    InvalidFilename,
    FilenameTooLong,
    BadMagic,
    BadVersion,
    BadRecord,
    // big-image store
    DuplicateFilename,
    ThresholdExceeded,
    NotFound,
    CorruptRecord,
    IndexDataMismatch,
    Io,
    // engine / features
    EmptyStore,
    InvalidArgument,
    AlphaLengthMismatch,
    ImageTooSmall,
    WrongColorMode,
    DimensionMismatch,
    // dispatch service
    BadFrame,
    PayloadTooLarge,
    UndecodablePayload,
    BadConfig,
    Transport,
    // benchmarks
    InsufficientFiles,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure surfaced by the library is an Error carrying a code; callers
// that need to branch on the failure kind switch on code() rather than parsing
// what().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace icp

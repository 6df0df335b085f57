#include "icp/error.hpp"

namespace icp {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorCode::TruncatedInput: return "TruncatedInput";
        case ErrorCode::BadHeader: return "BadHeader";
        case ErrorCode::InvalidFilename: return "InvalidFilename";
        case ErrorCode::FilenameTooLong: return "FilenameTooLong";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::BadVersion: return "BadVersion";
        case ErrorCode::BadRecord: return "BadRecord";
        case ErrorCode::DuplicateFilename: return "DuplicateFilename";
        case ErrorCode::ThresholdExceeded: return "ThresholdExceeded";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::CorruptRecord: return "CorruptRecord";
        case ErrorCode::IndexDataMismatch: return "IndexDataMismatch";
        case ErrorCode::Io: return "Io";
        case ErrorCode::EmptyStore: return "EmptyStore";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::AlphaLengthMismatch: return "AlphaLengthMismatch";
        case ErrorCode::ImageTooSmall: return "ImageTooSmall";
        case ErrorCode::WrongColorMode: return "WrongColorMode";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::BadFrame: return "BadFrame";
        case ErrorCode::PayloadTooLarge: return "PayloadTooLarge";
        case ErrorCode::UndecodablePayload: return "UndecodablePayload";
        case ErrorCode::BadConfig: return "BadConfig";
        case ErrorCode::Transport: return "Transport";
        case ErrorCode::InsufficientFiles: return "InsufficientFiles";
    }
    return "Unknown";
}

}  // namespace icp

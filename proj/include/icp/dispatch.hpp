#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "icp/error.hpp"
#include "icp/features.hpp"
#include "icp/pimage.hpp"

namespace icp::dicp {

inline constexpr std::size_t kDefaultPayloadLimit = 16u << 20;
inline constexpr std::size_t kMaxHeaderBytes = 4096;

struct Request {
    std::uint64_t request_id = 0;  // assigned by the service at ingest
    std::string filename;
    std::string extension;  // lowercase, no leading dot
    std::optional<std::string> hint;
    std::vector<std::uint8_t> payload;  // one P-Image record
    PImage image;                       // payload, decoded
};

struct FrameHeader {
    std::string filename;
    std::string extension;
    std::optional<std::string> hint;
    std::size_t payload_length = 0;
};

// "ICP/1 PROCESS <filename> <extension> <payload_len>[ <hint>]" without the
// trailing newline. Throws BadFrame or PayloadTooLarge.
FrameHeader parse_frame_header(std::string_view line, std::size_t payload_limit = kDefaultPayloadLimit);

// Header line, '\n', then exactly payload_len bytes holding a P-Image record.
// Throws BadFrame, PayloadTooLarge or UndecodablePayload.
Request parse_frame(std::span<const std::uint8_t> bytes, std::size_t payload_limit = kDefaultPayloadLimit);

std::vector<std::uint8_t> encode_frame(std::string_view filename, std::string_view extension,
                                       std::span<const std::uint8_t> record,
                                       std::optional<std::string_view> hint = std::nullopt);

struct MatchRule {
    std::string fn_pattern;  // exact filename or "*"
    std::string fe;          // lowercase extension
    Algorithm algorithm = Algorithm::Harris;

    bool operator==(const MatchRule&) const = default;
};

struct MatchConfig {
    std::vector<MatchRule> rules;
};

// One rule per line: "<fn_pattern> <fe> <algorithm>"; '#' starts a comment.
// Throws BadConfig naming the offending line.
MatchConfig parse_match_config(std::string_view text);
MatchConfig load_match_config(const std::filesystem::path& path);

// Index of the first rule in config order matching (filename, extension).
// Filenames compare exactly, extensions case-insensitively.
std::optional<std::size_t> match_rule(std::string_view filename, std::string_view extension,
                                      const MatchConfig& config);
std::optional<Algorithm> match_params(std::string_view filename, std::string_view extension,
                                      const MatchConfig& config);

enum class ResponseKind { Ok, NoMatch, Err };

struct Response {
    ResponseKind kind = ResponseKind::NoMatch;
    std::size_t n_keypoints = 0;
    std::string error_code;          // Err only
    std::vector<std::uint8_t> body;  // Ok: CSV then descriptor bytes; Err: message

    std::string message() const { return {body.begin(), body.end()}; }
};

Response ok_response(const ImageFeatures& features);
Response no_match_response();
Response error_response(std::string code, std::string_view message);

std::vector<std::uint8_t> encode_response(const Response& response);
// Throws BadFrame on a malformed response.
Response parse_response(std::span<const std::uint8_t> bytes);

// Splits an OK body back into keypoints and descriptors.
ImageFeatures decode_feature_body(const Response& response);

// Wire error code for a library error, e.g. BAD_FRAME.
std::string wire_error_code(ErrorCode code);

enum class Outcome { Completed, NoMatch, Failed };
std::string_view to_string(Outcome outcome) noexcept;

struct DispatchRecord {
    using Clock = std::chrono::steady_clock;

    std::uint64_t request_id = 0;
    std::optional<std::size_t> rule;
    Clock::time_point enqueued;
    Clock::time_point started;
    Clock::time_point finished;
    Outcome outcome = Outcome::Failed;
    std::optional<std::uint64_t> staging_offset;
    std::string storage_error;
    std::string error;
};

}  // namespace icp::dicp

#include "icp/dispatch.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstring>

#include "icp/byte_store.hpp"
#include "icp/engine.hpp"
#include "icp/error.hpp"

namespace icp::dicp {

namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        const auto next = line.find(' ', pos);
        const auto end = next == std::string_view::npos ? line.size() : next;
        tokens.push_back(line.substr(pos, end - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return tokens;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string normalize_extension(std::string_view ext) {
    if (!ext.empty() && ext.front() == '.') ext.remove_prefix(1);
    return lower(ext);
}

bool has_control_or_space(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](unsigned char c) { return c <= 0x20 || c == 0x7f; });
}

template <typename T>
std::optional<T> parse_decimal(std::string_view s) {
    T v{};
    if (s.empty()) return std::nullopt;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace

FrameHeader parse_frame_header(std::string_view line, std::size_t payload_limit) {
    const auto tokens = split_spaces(line);
    if (tokens.size() < 5 || tokens.size() > 6) throw Error(ErrorCode::BadFrame, "expected 5 or 6 header fields");
    if (tokens[0] != "ICP/1") throw Error(ErrorCode::BadFrame, "unknown protocol '" + std::string(tokens[0]) + "'");
    if (tokens[1] != "PROCESS") throw Error(ErrorCode::BadFrame, "unknown verb '" + std::string(tokens[1]) + "'");
    for (auto t : tokens) {
        if (t.empty() || has_control_or_space(t)) throw Error(ErrorCode::BadFrame, "empty or malformed header field");
    }
    FrameHeader h;
    h.filename.assign(tokens[2]);
    h.extension = normalize_extension(tokens[3]);
    if (h.extension.empty()) throw Error(ErrorCode::BadFrame, "empty extension");
    try {
        validate_filename(h.filename);
    } catch (const Error& e) {
        throw Error(ErrorCode::BadFrame, e.what());
    }
    const auto len = parse_decimal<std::uint64_t>(tokens[4]);
    if (!len) throw Error(ErrorCode::BadFrame, "payload length is not a decimal number");
    if (*len > payload_limit) {
        throw Error(ErrorCode::PayloadTooLarge,
                    std::to_string(*len) + " bytes exceeds the limit of " + std::to_string(payload_limit));
    }
    h.payload_length = static_cast<std::size_t>(*len);
    if (tokens.size() == 6) h.hint.emplace(tokens[5]);
    return h;
}

Request parse_frame(std::span<const std::uint8_t> bytes, std::size_t payload_limit) {
    const auto scan = std::min(bytes.size(), kMaxHeaderBytes);
    const auto* nl = scan ? static_cast<const std::uint8_t*>(std::memchr(bytes.data(), '\n', scan)) : nullptr;
    if (!nl) throw Error(ErrorCode::BadFrame, "header line not terminated");
    const std::size_t header_len = static_cast<std::size_t>(nl - bytes.data());
    FrameHeader h = parse_frame_header(
        std::string_view(reinterpret_cast<const char*>(bytes.data()), header_len), payload_limit);

    const auto payload = bytes.subspan(header_len + 1);
    if (payload.size() != h.payload_length) {
        throw Error(ErrorCode::BadFrame, "declared " + std::to_string(h.payload_length) + " payload bytes, received " +
                                             std::to_string(payload.size()));
    }
    Request req;
    try {
        if (peek_record_size(payload) != payload.size()) {
            throw Error(ErrorCode::BadRecord, "payload holds more than one record");
        }
        req.image = decode_record(payload);
    } catch (const Error& e) {
        throw Error(ErrorCode::UndecodablePayload, e.what());
    }
    req.filename = std::move(h.filename);
    req.extension = std::move(h.extension);
    req.hint = std::move(h.hint);
    req.payload.assign(payload.begin(), payload.end());
    return req;
}

std::vector<std::uint8_t> encode_frame(std::string_view filename, std::string_view extension,
                                       std::span<const std::uint8_t> record, std::optional<std::string_view> hint) {
    std::string header = "ICP/1 PROCESS " + std::string(filename) + " " + std::string(extension) + " " +
                         std::to_string(record.size());
    if (hint) header += " " + std::string(*hint);
    header += '\n';
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), record.begin(), record.end());
    return out;
}

MatchConfig parse_match_config(std::string_view text) {
    MatchConfig config;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);

        std::vector<std::string_view> fields;
        std::size_t pos = 0;
        while (pos < line.size()) {
            while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
            std::size_t end = pos;
            while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
            if (end > pos) fields.push_back(line.substr(pos, end - pos));
            pos = end;
        }
        if (fields.empty()) continue;
        const std::string where = "config line " + std::to_string(line_no);
        if (fields.size() != 3) throw Error(ErrorCode::BadConfig, where + ": expected '<fn_pattern> <fe> <algorithm>'");
        MatchRule rule;
        rule.fn_pattern.assign(fields[0]);
        rule.fe = normalize_extension(fields[1]);
        if (rule.fe.empty()) throw Error(ErrorCode::BadConfig, where + ": empty extension");
        try {
            rule.algorithm = parse_algorithm(fields[2]);
        } catch (const Error&) {
            throw Error(ErrorCode::BadConfig, where + ": unknown algorithm '" + std::string(fields[2]) + "'");
        }
        config.rules.push_back(std::move(rule));
    }
    return config;
}

MatchConfig load_match_config(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    return parse_match_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::optional<std::size_t> match_rule(std::string_view filename, std::string_view extension,
                                      const MatchConfig& config) {
    const std::string ext = normalize_extension(extension);
    for (std::size_t i = 0; i < config.rules.size(); ++i) {
        const MatchRule& r = config.rules[i];
        if ((r.fn_pattern == "*" || r.fn_pattern == filename) && r.fe == ext) return i;
    }
    return std::nullopt;
}

std::optional<Algorithm> match_params(std::string_view filename, std::string_view extension,
                                      const MatchConfig& config) {
    if (auto i = match_rule(filename, extension, config)) return config.rules[*i].algorithm;
    return std::nullopt;
}

Response ok_response(const ImageFeatures& features) {
    Response r;
    r.kind = ResponseKind::Ok;
    r.n_keypoints = features.keypoints.size();
    const std::string csv = features_csv(features);
    r.body.assign(csv.begin(), csv.end());
    const auto desc = descriptor_bytes(features);
    r.body.insert(r.body.end(), desc.begin(), desc.end());
    return r;
}

Response no_match_response() { return Response{}; }

Response error_response(std::string code, std::string_view message) {
    Response r;
    r.kind = ResponseKind::Err;
    r.error_code = std::move(code);
    r.body.assign(message.begin(), message.end());
    return r;
}

std::vector<std::uint8_t> encode_response(const Response& r) {
    std::string header;
    switch (r.kind) {
        case ResponseKind::Ok:
            header = "ICP/1 OK " + std::to_string(r.n_keypoints) + " " + std::to_string(r.body.size()) + "\n";
            break;
        case ResponseKind::NoMatch: header = "ICP/1 NO_MATCH 0 0\n"; break;
        case ResponseKind::Err:
            header = "ICP/1 ERR " + r.error_code + " " + std::to_string(r.body.size()) + "\n";
            break;
    }
    std::vector<std::uint8_t> out(header.begin(), header.end());
    if (r.kind != ResponseKind::NoMatch) out.insert(out.end(), r.body.begin(), r.body.end());
    return out;
}

Response parse_response(std::span<const std::uint8_t> bytes) {
    const auto scan = std::min(bytes.size(), kMaxHeaderBytes);
    const auto* nl = scan ? static_cast<const std::uint8_t*>(std::memchr(bytes.data(), '\n', scan)) : nullptr;
    if (!nl) throw Error(ErrorCode::BadFrame, "response header not terminated");
    const std::size_t header_len = static_cast<std::size_t>(nl - bytes.data());
    const auto tokens = split_spaces(std::string_view(reinterpret_cast<const char*>(bytes.data()), header_len));
    if (tokens.size() != 4 || tokens[0] != "ICP/1") throw Error(ErrorCode::BadFrame, "malformed response header");
    const auto body = bytes.subspan(header_len + 1);
    const auto body_len = parse_decimal<std::size_t>(tokens[3]);
    if (!body_len || *body_len != body.size()) throw Error(ErrorCode::BadFrame, "response body length mismatch");

    Response r;
    if (tokens[1] == "OK") {
        const auto n = parse_decimal<std::size_t>(tokens[2]);
        if (!n) throw Error(ErrorCode::BadFrame, "bad keypoint count");
        r.kind = ResponseKind::Ok;
        r.n_keypoints = *n;
    } else if (tokens[1] == "NO_MATCH") {
        if (tokens[2] != "0" || *body_len != 0) throw Error(ErrorCode::BadFrame, "NO_MATCH carries a body");
        r.kind = ResponseKind::NoMatch;
    } else if (tokens[1] == "ERR") {
        r.kind = ResponseKind::Err;
        r.error_code.assign(tokens[2]);
    } else {
        throw Error(ErrorCode::BadFrame, "unknown response status");
    }
    r.body.assign(body.begin(), body.end());
    return r;
}

namespace {

// Splits one CSV record, honouring double-quoted fields.
std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    return fields;
}

float to_float(const std::string& s) {
    float v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error(ErrorCode::BadFrame, "bad number '" + s + "'");
    return v;
}

}  // namespace

ImageFeatures decode_feature_body(const Response& r) {
    if (r.kind != ResponseKind::Ok) throw Error(ErrorCode::BadFrame, "not an OK response");
    ImageFeatures f;
    std::size_t pos = 0;
    const std::string_view body(reinterpret_cast<const char*>(r.body.data()), r.body.size());
    for (std::size_t line = 0; line <= r.n_keypoints; ++line) {
        const auto nl = body.find('\n', pos);
        if (nl == std::string_view::npos) throw Error(ErrorCode::BadFrame, "feature CSV shorter than keypoint count");
        const auto fields = split_csv_line(body.substr(pos, nl - pos));
        pos = nl + 1;
        if (line == 0) continue;
        if (fields.size() != 7) throw Error(ErrorCode::BadFrame, "feature row needs 7 fields");
        f.filename = fields[0];
        f.keypoints.push_back(
            Keypoint{to_float(fields[2]), to_float(fields[3]), to_float(fields[4]), to_float(fields[5]), to_float(fields[6])});
    }
    const std::size_t desc_bytes = r.body.size() - pos;
    if (desc_bytes != 0) {
        if (desc_bytes != f.keypoints.size() * 128 * sizeof(float)) {
            throw Error(ErrorCode::BadFrame, "descriptor block does not match keypoint count");
        }
        f.descriptors.values.resize(desc_bytes / sizeof(float));
        for (std::size_t i = 0; i < f.descriptors.values.size(); ++i) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) bits |= std::uint32_t{r.body[pos + 4 * i + b]} << (8 * b);
            std::memcpy(&f.descriptors.values[i], &bits, sizeof bits);
        }
    }
    return f;
}

std::string wire_error_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::BadFrame: return "BAD_FRAME";
        case ErrorCode::PayloadTooLarge: return "PAYLOAD_TOO_LARGE";
        case ErrorCode::UndecodablePayload: return "UNDECODABLE_PAYLOAD";
        case ErrorCode::ImageTooSmall:
        case ErrorCode::WrongColorMode:
        case ErrorCode::InvalidArgument: return "ALGORITHM_FAILED";
        default: return "INTERNAL";
    }
}

std::string_view to_string(Outcome outcome) noexcept {
    switch (outcome) {
        case Outcome::Completed: return "Completed";
        case Outcome::NoMatch: return "NoMatch";
        case Outcome::Failed: return "Failed";
    }
    return "Failed";
}

}  // namespace icp::dicp

#include "icp/pimage.hpp"

#include <cctype>
#include <limits>

#include "bytes.hpp"
#include "icp/error.hpp"

namespace icp {

namespace {

constexpr std::string_view kRecordMagic = "PIMG";

bool is_pnm_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

class PnmHeaderParser {
public:
    explicit PnmHeaderParser(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint64_t number(std::string_view field) {
        skip_space_and_comments();
        if (pos_ >= bytes_.size()) {
            throw Error(ErrorCode::TruncatedInput, "PNM header ends before " + std::string(field));
        }
        if (!std::isdigit(bytes_[pos_])) {
            throw Error(ErrorCode::BadHeader, "non-numeric " + std::string(field));
        }
        std::uint64_t value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > std::numeric_limits<std::uint32_t>::max()) {
                throw Error(ErrorCode::BadHeader, std::string(field) + " out of range");
            }
            ++pos_;
        }
        if (pos_ < bytes_.size() && !is_pnm_space(bytes_[pos_]) && bytes_[pos_] != '#') {
            throw Error(ErrorCode::BadHeader, "non-numeric " + std::string(field));
        }
        return value;
    }

    // The single whitespace byte that terminates maxval.
    void end_of_header() {
        if (pos_ >= bytes_.size()) {
            throw Error(ErrorCode::TruncatedInput, "PNM header has no terminator");
        }
        ++pos_;
    }

    std::size_t position() const noexcept { return pos_; }
    void skip(std::size_t n) { pos_ += n; }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (is_pnm_space(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

void validate_filename(std::string_view name) {
    if (name.empty()) {
        throw Error(ErrorCode::InvalidFilename, "empty filename");
    }
    if (name.size() > kMaxFilenameBytes) {
        throw Error(ErrorCode::FilenameTooLong, std::to_string(name.size()) + " bytes");
    }
    for (char c : name) {
        if (c == '/' || c == '\\' || c == '\0') {
            throw Error(ErrorCode::InvalidFilename, "filename contains a path separator or NUL");
        }
    }
}

void validate_matrix(const PixelMatrix& m) {
    if (m.width == 0 || m.height == 0) {
        throw Error(ErrorCode::BadRecord, "zero image dimension");
    }
    if (m.mode != ColorMode::Grey && m.mode != ColorMode::RGB) {
        throw Error(ErrorCode::BadRecord, "unknown color mode");
    }
    if (m.data.size() != m.byte_size()) {
        throw Error(ErrorCode::BadRecord, "sample count does not match dimensions");
    }
}

PImage decode_pnm(std::span<const std::uint8_t> bytes, std::string filename) {
    validate_filename(filename);
    if (bytes.size() < 2) {
        throw Error(ErrorCode::TruncatedInput, "missing PNM magic");
    }
    if (bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw Error(ErrorCode::UnsupportedFormat, "not a binary P5/P6 stream");
    }
    const ColorMode mode = bytes[1] == '5' ? ColorMode::Grey : ColorMode::RGB;

    PnmHeaderParser header(bytes);
    header.skip(2);
    const auto width = header.number("width");
    const auto height = header.number("height");
    const auto maxval = header.number("maxval");
    if (width == 0 || height == 0) {
        throw Error(ErrorCode::BadHeader, "nonpositive dimensions");
    }
    if (maxval != 255) {
        throw Error(ErrorCode::UnsupportedFormat, "maxval " + std::to_string(maxval) + " (only 255 supported)");
    }
    header.end_of_header();

    const std::uint64_t need = width * height * channels(mode);
    const std::size_t have = bytes.size() - header.position();
    if (need > have) {
        throw Error(ErrorCode::TruncatedInput,
                    "header promises " + std::to_string(need) + " sample bytes, found " + std::to_string(have));
    }

    PImage img;
    img.filename = std::move(filename);
    img.matrix.width = static_cast<std::uint32_t>(width);
    img.matrix.height = static_cast<std::uint32_t>(height);
    img.matrix.mode = mode;
    auto samples = bytes.subspan(header.position(), static_cast<std::size_t>(need));
    img.matrix.data.assign(samples.begin(), samples.end());
    return img;
}

std::vector<std::uint8_t> encode_pnm(const PixelMatrix& m) {
    validate_matrix(m);
    std::string header = (m.mode == ColorMode::Grey ? "P5\n" : "P6\n") + std::to_string(m.width) + " " +
                         std::to_string(m.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), m.data.begin(), m.data.end());
    return out;
}

// Weights are scaled by 10^4 so the rounding is exact integer arithmetic.
std::uint8_t grey_value(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
    const std::uint32_t scaled = 2989u * r + 5870u * g + 1140u * b;
    const std::uint32_t rounded = (scaled + 5000u) / 10000u;
    return static_cast<std::uint8_t>(rounded > 255u ? 255u : rounded);
}

PixelMatrix to_grey(const PixelMatrix& m) {
    if (m.mode == ColorMode::Grey) return m;
    PixelMatrix out;
    out.width = m.width;
    out.height = m.height;
    out.mode = ColorMode::Grey;
    out.data.resize(m.pixel_count());
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = grey_value(m.data[3 * i], m.data[3 * i + 1], m.data[3 * i + 2]);
    }
    return out;
}

PImage to_grey(const PImage& img) { return PImage{img.filename, to_grey(img.matrix)}; }

std::size_t record_size(const PImage& img) noexcept {
    return kRecordHeaderBytes + img.filename.size() + img.matrix.data.size();
}

void encode_record_into(const PImage& img, std::vector<std::uint8_t>& out) {
    validate_filename(img.filename);
    validate_matrix(img.matrix);
    out.reserve(out.size() + record_size(img));
    detail::put_bytes(out, kRecordMagic);
    out.push_back(kRecordVersion);
    detail::put_le(out, static_cast<std::uint16_t>(img.filename.size()));
    detail::put_bytes(out, img.filename);
    detail::put_le(out, img.matrix.width);
    detail::put_le(out, img.matrix.height);
    out.push_back(static_cast<std::uint8_t>(img.matrix.mode));
    out.insert(out.end(), img.matrix.data.begin(), img.matrix.data.end());
}

std::vector<std::uint8_t> encode_record(const PImage& img) {
    std::vector<std::uint8_t> out;
    encode_record_into(img, out);
    return out;
}

namespace {

struct RecordHeader {
    std::string_view filename;
    std::uint32_t width;
    std::uint32_t height;
    ColorMode mode;
    std::size_t sample_bytes;
};

RecordHeader read_record_header(detail::ByteReader& in) {
    auto magic = in.take_string(4);
    if (magic != kRecordMagic) {
        throw Error(ErrorCode::BadMagic, "record does not start with PIMG");
    }
    if (auto version = in.le<std::uint8_t>(); version != kRecordVersion) {
        throw Error(ErrorCode::BadVersion, "record version " + std::to_string(version));
    }
    RecordHeader h{};
    const auto name_len = in.le<std::uint16_t>();
    h.filename = in.take_string(name_len);
    h.width = in.le<std::uint32_t>();
    h.height = in.le<std::uint32_t>();
    const auto mode = in.le<std::uint8_t>();
    if (mode > 0x01) {
        throw Error(ErrorCode::BadRecord, "unknown color mode " + std::to_string(mode));
    }
    h.mode = static_cast<ColorMode>(mode);
    if (h.width == 0 || h.height == 0) {
        throw Error(ErrorCode::BadRecord, "zero image dimension");
    }
    try {
        validate_filename(h.filename);
    } catch (const Error& e) {
        throw Error(ErrorCode::BadRecord, e.what());
    }
    const std::uint64_t samples = std::uint64_t{h.width} * h.height * channels(h.mode);
    if (samples > in.remaining()) {
        throw Error(ErrorCode::TruncatedInput,
                    "record needs " + std::to_string(samples) + " sample bytes, have " + std::to_string(in.remaining()));
    }
    h.sample_bytes = static_cast<std::size_t>(samples);
    return h;
}

}  // namespace

PImage decode_record(std::span<const std::uint8_t> bytes) {
    detail::ByteReader in(bytes, ErrorCode::TruncatedInput);
    const RecordHeader h = read_record_header(in);
    PImage img;
    img.filename.assign(h.filename);
    img.matrix.width = h.width;
    img.matrix.height = h.height;
    img.matrix.mode = h.mode;
    auto samples = in.take(h.sample_bytes);
    img.matrix.data.assign(samples.begin(), samples.end());
    return img;
}

std::size_t peek_record_size(std::span<const std::uint8_t> bytes) {
    detail::ByteReader in(bytes, ErrorCode::TruncatedInput);
    const RecordHeader h = read_record_header(in);
    return in.position() + h.sample_bytes;
}

}  // namespace icp

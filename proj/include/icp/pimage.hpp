#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace icp {

enum class ColorMode : std::uint8_t { Grey = 0x00, RGB = 0x01 };

constexpr std::size_t channels(ColorMode mode) noexcept { return mode == ColorMode::RGB ? 3 : 1; }

// Row-major sample matrix. RGB samples are interleaved R,G,B.
struct PixelMatrix {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    ColorMode mode = ColorMode::Grey;
    std::vector<std::uint8_t> data;

    std::size_t pixel_count() const noexcept { return std::size_t{width} * height; }
    std::size_t byte_size() const noexcept { return pixel_count() * channels(mode); }

    std::uint8_t at(std::uint32_t x, std::uint32_t y, std::size_t channel = 0) const {
        return data[(std::size_t{y} * width + x) * channels(mode) + channel];
    }

    bool operator==(const PixelMatrix&) const = default;
};

// Decoded image record: the filename plus its pixel matrix, nothing else.
struct PImage {
    std::string filename;
    PixelMatrix matrix;

    bool operator==(const PImage&) const = default;
};

inline constexpr std::size_t kMaxFilenameBytes = 65535;
inline constexpr std::uint8_t kRecordVersion = 0x01;
// magic(4) + version(1) + filename_len(2) + width(4) + height(4) + mode(1)
inline constexpr std::size_t kRecordHeaderBytes = 16;
// One-byte filename and a single grey pixel.
inline constexpr std::size_t kMinRecordBytes = kRecordHeaderBytes + 2;

// Throws InvalidFilename (empty, '/', '\\' or NUL) or FilenameTooLong.
void validate_filename(std::string_view name);

// Throws BadRecord if the matrix invariants are violated.
void validate_matrix(const PixelMatrix& matrix);

// Binary PNM (P5 grey / P6 RGB, maxval 255). Comments in the header are
// accepted; exactly one whitespace byte separates maxval from the samples.
PImage decode_pnm(std::span<const std::uint8_t> bytes, std::string filename);

// Inverse of decode_pnm, used by the synthetic dataset writer.
std::vector<std::uint8_t> encode_pnm(const PixelMatrix& matrix);

// Weighted RGB to grey with round-half-up. Grey input is returned unchanged.
std::uint8_t grey_value(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept;
PImage to_grey(const PImage& img);
PixelMatrix to_grey(const PixelMatrix& matrix);

std::size_t record_size(const PImage& img) noexcept;

// Record layout, little-endian:
//   "PIMG" | version u8 | filename_len u16 | filename | width u32 | height u32
//   | mode u8 | samples
std::vector<std::uint8_t> encode_record(const PImage& img);
void encode_record_into(const PImage& img, std::vector<std::uint8_t>& out);

// Decodes the record at the start of bytes; anything after it is ignored.
PImage decode_record(std::span<const std::uint8_t> bytes);

// Size in bytes of the record at the start of bytes, validated against what
// is available, without materializing the pixels.
std::size_t peek_record_size(std::span<const std::uint8_t> bytes);

}  // namespace icp

#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "icp/error.hpp"
#include "icp/pimage.hpp"
#include "support.hpp"

using namespace icp;

namespace {

std::vector<std::uint8_t> bytes(std::string_view s) { return {s.begin(), s.end()}; }

std::vector<std::uint8_t> concat(std::string_view header, std::vector<std::uint8_t> samples) {
    auto out = bytes(header);
    out.insert(out.end(), samples.begin(), samples.end());
    return out;
}

// Round-half-up of 0.2989 R + 0.5870 G + 0.1140 B computed as an exact
// rational: quotient plus one when the remainder reaches one half.
int grey_oracle(int r, int g, int b) {
    const long num = 2989L * r + 5870L * g + 1140L * b;
    const long q = num / 10000, rem = num % 10000;
    return static_cast<int>(std::min<long>(255, q + (2 * rem >= 10000 ? 1 : 0)));
}

}  // namespace

TEST_CASE("decode a hand-written P5 stream") {
    const PImage img = decode_pnm(concat("P5\n3 2\n255\n", {0, 1, 2, 3, 4, 255}), "a.pgm");
    CHECK(img.filename == "a.pgm");
    CHECK(img.matrix.width == 3);
    CHECK(img.matrix.height == 2);
    CHECK(img.matrix.mode == ColorMode::Grey);
    CHECK(img.matrix.data == std::vector<std::uint8_t>{0, 1, 2, 3, 4, 255});
    CHECK(img.matrix.at(2, 1) == 255);
}

TEST_CASE("decode P6 with header comments and odd whitespace") {
    const PImage img = decode_pnm(concat("P6 # colour\n# another\n1\t1\r\n255\n", {10, 20, 30}), "c.ppm");
    CHECK(img.matrix.mode == ColorMode::RGB);
    CHECK(img.matrix.data == std::vector<std::uint8_t>{10, 20, 30});
}

TEST_CASE("whitespace byte after maxval belongs to the header") {
    // Sample value 10 is '\n'; it must survive as data.
    const PImage img = decode_pnm(concat("P5 1 2 255\n", {10, 32}), "ws.pgm");
    CHECK(img.matrix.data == std::vector<std::uint8_t>{10, 32});
}

TEST_CASE("PNM errors are classified") {
    REQUIRE_ERROR_CODE(decode_pnm(bytes("P2\n1 1\n255\n0"), "x"), ErrorCode::UnsupportedFormat);
    REQUIRE_ERROR_CODE(decode_pnm(bytes("JUNK"), "x"), ErrorCode::UnsupportedFormat);
    REQUIRE_ERROR_CODE(decode_pnm(bytes("P"), "x"), ErrorCode::TruncatedInput);
    REQUIRE_ERROR_CODE(decode_pnm(bytes("P5\n2 2\n255\n\1\2"), "x"), ErrorCode::TruncatedInput);
    REQUIRE_ERROR_CODE(decode_pnm(bytes("P5\n2 2"), "x"), ErrorCode::TruncatedInput);
    REQUIRE_ERROR_CODE(decode_pnm(bytes("P5\nx 2\n255\n"), "x"), ErrorCode::BadHeader);
    REQUIRE_ERROR_CODE(decode_pnm(bytes("P5\n0 2\n255\n"), "x"), ErrorCode::BadHeader);
    REQUIRE_ERROR_CODE(decode_pnm(concat("P5\n1 1\n65535\n", {0, 0}), "x"), ErrorCode::UnsupportedFormat);
    REQUIRE_ERROR_CODE(decode_pnm(concat("P5\n1 1\n255\n", {0}), ""), ErrorCode::InvalidFilename);
    REQUIRE_ERROR_CODE(decode_pnm(concat("P5\n1 1\n255\n", {0}), "a/b"), ErrorCode::InvalidFilename);
}

TEST_CASE("encode_pnm inverts decode_pnm") {
    PixelMatrix m{2, 2, ColorMode::RGB, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}};
    CHECK(decode_pnm(encode_pnm(m), "r.ppm").matrix == m);
}

TEST_CASE("record bytes match the documented layout") {
    const PImage img{"cat", PixelMatrix{1, 1, ColorMode::Grey, {7}}};
    const std::vector<std::uint8_t> expected = {'P', 'I', 'M', 'G', 1, 3, 0, 'c', 'a', 't',
                                                1,   0,   0,   0,   1, 0, 0, 0,   0,   7};
    CHECK(encode_record(img) == expected);
    CHECK(record_size(img) == 20);
    CHECK(peek_record_size(expected) == 20);
    CHECK(decode_record(expected) == img);
}

TEST_CASE("record round trip for random images") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const auto w = static_cast<std::uint32_t>(rng() % 40 + 1), h = static_cast<std::uint32_t>(rng() % 40 + 1);
        const ColorMode mode = rng() & 1 ? ColorMode::RGB : ColorMode::Grey;
        PixelMatrix m{w, h, mode, std::vector<std::uint8_t>(std::size_t{w} * h * channels(mode))};
        for (auto& v : m.data) v = static_cast<std::uint8_t>(rng());
        const PImage img{"img" + std::to_string(i), m};
        const auto rec = encode_record(img);
        REQUIRE(rec.size() == record_size(img));
        CHECK(decode_record(rec) == img);
    }
}

TEST_CASE("record decode rejects damaged input") {
    const PImage img{"dog", PixelMatrix{2, 1, ColorMode::RGB, {1, 2, 3, 4, 5, 6}}};
    const auto good = encode_record(img);

    auto bad = good;
    bad[0] = 'X';
    REQUIRE_ERROR_CODE(decode_record(bad), ErrorCode::BadMagic);
    bad = good;
    bad[4] = 2;
    REQUIRE_ERROR_CODE(decode_record(bad), ErrorCode::BadVersion);
    bad = good;
    bad[7 + 3 + 8] = 9;  // mode byte
    REQUIRE_ERROR_CODE(decode_record(bad), ErrorCode::BadRecord);
    bad = good;
    bad[7 + 3] = 0;  // width = 0
    REQUIRE_ERROR_CODE(decode_record(bad), ErrorCode::BadRecord);
    bad = good;
    bad[7] = '/';
    REQUIRE_ERROR_CODE(decode_record(bad), ErrorCode::BadRecord);
    for (std::size_t cut = 0; cut < good.size(); ++cut) {
        const std::vector<std::uint8_t> prefix(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut));
        REQUIRE_ERROR_CODE(decode_record(prefix), ErrorCode::TruncatedInput);
    }
}

TEST_CASE("filename validation") {
    CHECK_NOTHROW(validate_filename("plain.pgm"));
    CHECK_NOTHROW(validate_filename(std::string(kMaxFilenameBytes, 'a')));
    REQUIRE_ERROR_CODE(validate_filename(std::string(kMaxFilenameBytes + 1, 'a')), ErrorCode::FilenameTooLong);
    REQUIRE_ERROR_CODE(validate_filename("a\\b"), ErrorCode::InvalidFilename);
    REQUIRE_ERROR_CODE(validate_filename(std::string("a\0b", 3)), ErrorCode::InvalidFilename);
}

TEST_CASE("grey conversion matches the rational oracle exhaustively on a lattice") {
    long mismatches = 0;
    for (int r = 0; r < 256; r += 3) {
        for (int g = 0; g < 256; g += 5) {
            for (int b = 0; b < 256; ++b) {
                mismatches += grey_value(static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                                         static_cast<std::uint8_t>(b)) != grey_oracle(r, g, b);
            }
        }
    }
    CHECK(mismatches == 0);
    CHECK(grey_value(255, 255, 255) == 255);
    CHECK(grey_value(0, 0, 0) == 0);
    CHECK(grey_value(255, 0, 0) == 76);  // 76.2195
    CHECK(grey_value(0, 255, 0) == 150);  // 149.685
    CHECK(grey_value(0, 0, 255) == 29);  // 29.07
}

TEST_CASE("to_grey converts RGB and leaves grey alone") {
    const PImage rgb{"x", PixelMatrix{2, 1, ColorMode::RGB, {255, 0, 0, 0, 0, 255}}};
    const PImage grey = to_grey(rgb);
    CHECK(grey.matrix.mode == ColorMode::Grey);
    CHECK(grey.matrix.data == std::vector<std::uint8_t>{76, 29});
    CHECK(to_grey(grey) == grey);
}

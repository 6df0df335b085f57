#include <doctest.h>

#include "icp/dispatch.hpp"
#include "icp/error.hpp"
#include "icp/synth.hpp"
#include "support.hpp"

using namespace icp;
using namespace icp::dicp;

namespace {

std::vector<std::uint8_t> cat_record() { return encode_record(PImage{"cat", PixelMatrix{1, 1, ColorMode::Grey, {7}}}); }

std::vector<std::uint8_t> frame_text(std::string_view header, std::span<const std::uint8_t> payload) {
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

}  // namespace

TEST_CASE("parse the documented example frame") {
    const auto rec = cat_record();
    REQUIRE(rec.size() == 20);
    const Request r = parse_frame(frame_text("ICP/1 PROCESS cat pgm 20\n", rec));
    CHECK(r.filename == "cat");
    CHECK(r.extension == "pgm");
    CHECK_FALSE(r.hint.has_value());
    CHECK(r.payload == rec);
    CHECK(r.image.matrix.data == std::vector<std::uint8_t>{7});
    CHECK(encode_frame("cat", "pgm", rec) == frame_text("ICP/1 PROCESS cat pgm 20\n", rec));
}

TEST_CASE("frame header variants") {
    const auto rec = cat_record();
    const Request upper = parse_frame(frame_text("ICP/1 PROCESS cat .PGM 20\n", rec));
    CHECK(upper.extension == "pgm");
    const Request hinted = parse_frame(frame_text("ICP/1 PROCESS cat pgm 20 sift\n", rec));
    CHECK(hinted.hint == std::optional<std::string>("sift"));
    CHECK(parse_frame(encode_frame("cat", "pgm", rec, "fast")).hint == std::optional<std::string>("fast"));
}

TEST_CASE("frame errors") {
    const auto rec = cat_record();
    REQUIRE_ERROR_CODE(parse_frame(frame_text("ICP/1 PROCESS cat pgm 20", {})), ErrorCode::BadFrame);
    REQUIRE_ERROR_CODE(parse_frame(frame_text("ICP/1 PROCESS cat pgm 20\n", std::span(rec).first(10))),
                       ErrorCode::BadFrame);
    auto longer = rec;
    longer.push_back(0);
    REQUIRE_ERROR_CODE(parse_frame(frame_text("ICP/1 PROCESS cat pgm 20\n", longer)), ErrorCode::BadFrame);
    for (const char* h : {"ICP/2 PROCESS cat pgm 20\n", "ICP/1 FETCH cat pgm 20\n", "ICP/1 PROCESS cat pgm\n",
                          "ICP/1 PROCESS cat pgm 20 a b\n", "ICP/1 PROCESS  cat pgm 20\n", "ICP/1 PROCESS cat pgm -1\n",
                          "ICP/1 PROCESS cat pgm 2x\n", "ICP/1 PROCESS cat . 20\n", "ICP/1 PROCESS cat pgm 20\r\n",
                          "ICP/1 PROCESS a\\b pgm 20\n", "\n"}) {
        CAPTURE(h);
        REQUIRE_ERROR_CODE(parse_frame(frame_text(h, rec)), ErrorCode::BadFrame);
    }
    REQUIRE_ERROR_CODE(parse_frame_header("ICP/1 PROCESS cat pgm 16777217"), ErrorCode::PayloadTooLarge);
    REQUIRE_ERROR_CODE(parse_frame_header("ICP/1 PROCESS cat pgm 99999999999999999999999"), ErrorCode::BadFrame);
    REQUIRE_ERROR_CODE(parse_frame(frame_text("ICP/1 PROCESS cat pgm 20\n", rec), 19), ErrorCode::PayloadTooLarge);
    auto broken = rec;
    broken[0] = 'X';
    REQUIRE_ERROR_CODE(parse_frame(frame_text("ICP/1 PROCESS cat pgm 20\n", broken)), ErrorCode::UndecodablePayload);
    const std::string long_header = "ICP/1 PROCESS " + std::string(5000, 'a') + " pgm 20\n";
    REQUIRE_ERROR_CODE(parse_frame(frame_text(long_header, rec)), ErrorCode::BadFrame);
}

TEST_CASE("config parsing") {
    const auto cfg = parse_match_config(
        "# rules\n"
        "cat pgm harris\n"
        "\n"
        "  *   .PPM   SIFT   # trailing comment\n"
        "\t* pgm sift\n");
    REQUIRE(cfg.rules.size() == 3);
    CHECK(cfg.rules[0] == MatchRule{"cat", "pgm", Algorithm::Harris});
    CHECK(cfg.rules[1] == MatchRule{"*", "ppm", Algorithm::Sift});
    CHECK(parse_match_config("").rules.empty());
    CHECK(parse_match_config("# nothing\n\n").rules.empty());

    try {
        parse_match_config("cat pgm harris\ncat pgm\n");
        FAIL("expected BadConfig");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BadConfig);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    REQUIRE_ERROR_CODE(parse_match_config("cat pgm surf\n"), ErrorCode::BadConfig);
    REQUIRE_ERROR_CODE(parse_match_config("cat . harris\n"), ErrorCode::BadConfig);
    REQUIRE_ERROR_CODE(parse_match_config("cat pgm harris extra\n"), ErrorCode::BadConfig);
}

TEST_CASE("first matching rule wins") {
    const auto cfg = parse_match_config("cat pgm harris\n* pgm sift\n");
    CHECK(match_params("cat", "pgm", cfg) == Algorithm::Harris);
    CHECK(match_params("dog", "pgm", cfg) == Algorithm::Sift);
    CHECK(match_params("cat", "gif", cfg) == std::nullopt);
    CHECK(match_params("Cat", "PGM", cfg) == Algorithm::Sift);  // filename is case-sensitive
    CHECK(match_rule("dog", "pgm", cfg) == 1u);
}

TEST_CASE("response codec") {
    ImageFeatures f{"sq", {{1, 2, 1.6f, 0.5f, 3}, {4, 5, 2, 1, 0.25f}}, {}};
    f.descriptors.values.assign(256, 0.0f);
    f.descriptors.values[5] = 1.0f;
    const Response ok = ok_response(f);
    const auto bytes = encode_response(ok);
    const Response back = parse_response(bytes);
    CHECK(back.kind == ResponseKind::Ok);
    CHECK(back.n_keypoints == 2);
    CHECK(decode_feature_body(back) == f);

    const auto nm = encode_response(no_match_response());
    CHECK(std::string(nm.begin(), nm.end()) == "ICP/1 NO_MATCH 0 0\n");
    CHECK(parse_response(nm).kind == ResponseKind::NoMatch);

    const auto err = encode_response(error_response("BAD_FRAME", "nope"));
    CHECK(std::string(err.begin(), err.end()) == "ICP/1 ERR BAD_FRAME 4\nnope");
    const Response e = parse_response(err);
    CHECK(e.error_code == "BAD_FRAME");
    CHECK(e.message() == "nope");

    auto cut = bytes;
    cut.pop_back();
    REQUIRE_ERROR_CODE(parse_response(cut), ErrorCode::BadFrame);
    REQUIRE_ERROR_CODE(parse_response(std::vector<std::uint8_t>{'x'}), ErrorCode::BadFrame);
}

TEST_CASE("wire error codes") {
    CHECK(wire_error_code(ErrorCode::BadFrame) == "BAD_FRAME");
    CHECK(wire_error_code(ErrorCode::PayloadTooLarge) == "PAYLOAD_TOO_LARGE");
    CHECK(wire_error_code(ErrorCode::UndecodablePayload) == "UNDECODABLE_PAYLOAD");
    CHECK(wire_error_code(ErrorCode::ImageTooSmall) == "ALGORITHM_FAILED");
    CHECK(wire_error_code(ErrorCode::Io) == "INTERNAL");
}

#include <doctest.h>

#include <sys/socket.h>
#include <netinet/in.h>
#include <arpa/inet.h>
#include <unistd.h>

#include <set>
#include <thread>

#include "icp/bigimage.hpp"
#include "icp/error.hpp"
#include "icp/server.hpp"
#include "icp/synth.hpp"
#include "support.hpp"

using namespace icp;
using namespace icp::dicp;

namespace {

Request make_request(const PImage& img, std::string filename, std::string ext) {
    const auto rec = encode_record(img);
    return parse_frame(encode_frame(filename, ext, rec));
}

PImage square_image() { return PImage{"square", synth::white_square(64, 64, 20, 20, 24)}; }

// Raw exchange on a socket for frames the client helper would refuse to build.
std::vector<std::uint8_t> raw_exchange(const Endpoint& ep, std::string_view bytes) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    REQUIRE(::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL) == static_cast<ssize_t>(bytes.size()));
    ::shutdown(fd, SHUT_WR);
    std::vector<std::uint8_t> out;
    char buf[4096];
    for (ssize_t n; (n = ::recv(fd, buf, sizeof buf, 0)) > 0;) out.insert(out.end(), buf, buf + n);
    ::close(fd);
    return out;
}

}  // namespace

TEST_CASE("matched request returns features and is staged") {
    DicpService svc(parse_match_config("square pgm harris\n"));
    const Response r = svc.handle_request(make_request(square_image(), "square", "pgm"));
    REQUIRE(r.kind == ResponseKind::Ok);
    CHECK(r.n_keypoints == 4);
    CHECK(decode_feature_body(r).keypoints.size() == 4);
    CHECK(svc.staging_size() == 1);
    const auto records = svc.records();
    REQUIRE(records.size() == 1);
    CHECK(records[0].outcome == Outcome::Completed);
    CHECK(records[0].rule == 0u);
    CHECK(records[0].staging_offset == 0u);
    CHECK(records[0].enqueued <= records[0].started);
    CHECK(records[0].started <= records[0].finished);
    const auto entries = svc.staging_entries();
    CHECK(entries[0].filename == "1-square.pgm");
    CHECK(svc.staged_image("1-square.pgm").matrix == square_image().matrix);
}

TEST_CASE("unmatched request still reaches the staging store") {
    DicpService svc(parse_match_config("cat pgm harris\n"));
    const Response r = svc.handle_request(make_request(square_image(), "square", "gif"));
    CHECK(r.kind == ResponseKind::NoMatch);
    CHECK(svc.staging_size() == 1);
    REQUIRE(svc.records().size() == 1);
    CHECK(svc.records()[0].outcome == Outcome::NoMatch);
    CHECK_FALSE(svc.records()[0].rule.has_value());
}

TEST_CASE("algorithm failure does not stop the storage path") {
    DicpService svc(parse_match_config("* pgm harris\n"));
    const PImage tiny{"t", PixelMatrix{3, 3, ColorMode::Grey, std::vector<std::uint8_t>(9)}};
    const Response r = svc.handle_request(make_request(tiny, "t", "pgm"));
    CHECK(r.kind == ResponseKind::Err);
    CHECK(r.error_code == "ALGORITHM_FAILED");
    CHECK(svc.staging_size() == 1);
    CHECK(svc.records()[0].outcome == Outcome::Failed);
}

TEST_CASE("storage failure does not stop the matching path") {
    ServiceOptions opt;
    opt.staging_threshold = 10;  // nothing fits
    DicpService svc(parse_match_config("* pgm harris\n"), opt);
    const Response r = svc.handle_request(make_request(square_image(), "square", "pgm"));
    CHECK(r.kind == ResponseKind::Ok);
    CHECK(svc.staging_size() == 0);
    const auto rec = svc.records().at(0);
    CHECK(rec.outcome == Outcome::Completed);
    CHECK_FALSE(rec.staging_offset.has_value());
    CHECK(rec.storage_error.find("ThresholdExceeded") != std::string::npos);
}

TEST_CASE("unparseable frames are logged as failures") {
    DicpService svc(MatchConfig{});
    const std::string junk = "HELLO\n";
    const Response r = svc.handle_frame(std::span(reinterpret_cast<const std::uint8_t*>(junk.data()), junk.size()));
    CHECK(r.kind == ResponseKind::Err);
    CHECK(r.error_code == "BAD_FRAME");
    CHECK(svc.records().at(0).outcome == Outcome::Failed);
    CHECK(svc.staging_size() == 0);
}

TEST_CASE("concurrent requests all complete and the pool bounds concurrency") {
    ServiceOptions opt;
    opt.max_inflight = 2;
    DicpService svc(parse_match_config("* pgm sift\n"), opt);
    const PImage img{"tex", synth::value_noise(64, 64, 3)};
    std::vector<std::thread> clients;
    std::atomic<int> ok{0};
    for (int i = 0; i < 50; ++i) {
        clients.emplace_back([&] {
            if (svc.handle_request(make_request(img, "tex", "pgm")).kind == ResponseKind::Ok) ++ok;
        });
    }
    for (auto& c : clients) c.join();
    CHECK(ok == 50);
    CHECK(svc.staging_size() == 50);
    const auto records = svc.records();
    CHECK(records.size() == 50);
    std::set<std::uint64_t> ids;
    for (const auto& r : records) {
        CHECK(r.outcome == Outcome::Completed);
        ids.insert(r.request_id);
    }
    CHECK(ids.size() == 50);
    CHECK(svc.peak_inflight() >= 1);
    CHECK(svc.peak_inflight() <= 2);
}

TEST_CASE("endpoint parsing") {
    const auto a = Endpoint::parse("10.0.0.1:80");
    CHECK(a.host == "10.0.0.1");
    CHECK(a.port == 80);
    CHECK(Endpoint::parse(":9000").host == "127.0.0.1");
    REQUIRE_ERROR_CODE(Endpoint::parse("nohost"), ErrorCode::InvalidArgument);
    REQUIRE_ERROR_CODE(Endpoint::parse("h:70000"), ErrorCode::InvalidArgument);
    REQUIRE_ERROR_CODE(Endpoint::parse("h:"), ErrorCode::InvalidArgument);
}

TEST_CASE("tcp round trip") {
    test::TempDir dir;
    DicpService svc(parse_match_config("square pgm harris\n"));
    DicpServer server(svc, Endpoint::parse("127.0.0.1:0"));
    server.start();
    const Endpoint ep = server.endpoint();
    REQUIRE(ep.port != 0);

    const auto rec = encode_record(square_image());
    const Response ok = send_frame(ep, encode_frame("square", "pgm", rec));
    REQUIRE(ok.kind == ResponseKind::Ok);
    CHECK(ok.n_keypoints == 4);
    CHECK(send_frame(ep, encode_frame("square", "png", rec)).kind == ResponseKind::NoMatch);

    auto err = parse_response(raw_exchange(ep, "GARBAGE\n"));
    CHECK(err.error_code == "BAD_FRAME");
    err = parse_response(raw_exchange(ep, "ICP/1 PROCESS a pgm 999999999\n"));
    CHECK(err.error_code == "PAYLOAD_TOO_LARGE");
    err = parse_response(raw_exchange(ep, "ICP/1 PROCESS a pgm 20\nshort"));
    CHECK(err.error_code == "BAD_FRAME");
    err = parse_response(raw_exchange(ep, "no newline at all"));
    CHECK(err.error_code == "BAD_FRAME");
    err = parse_response(raw_exchange(ep, std::string(6000, 'x')));
    CHECK(err.error_code == "BAD_FRAME");

    server.stop();
    CHECK(server.connections_served() == 7);
    CHECK(svc.staging_size() == 2);
    const auto paths = store_paths(dir.path(), "staging");
    svc.save_staging(paths);
    CHECK(BigImage::load(paths.data, paths.index).size() == 2);
    REQUIRE_ERROR_CODE(send_frame(ep, encode_frame("square", "pgm", rec), std::chrono::seconds(2)),
                       ErrorCode::Transport);
}

TEST_CASE("stability and pressure trials over tcp") {
    DicpService svc(parse_match_config("* pgm harris\n"));
    DicpServer server(svc, Endpoint::parse("127.0.0.1:0"));
    server.start();
    const auto up = make_upload(PImage{"n", synth::value_noise(48, 48, 2)}, "n", "pgm");

    std::vector<std::vector<UploadImage>> batches = {{up, up, up}, {}, {up}};
    const auto st = run_stability_trial(server.endpoint(), batches, 4, std::chrono::milliseconds(1));
    REQUIRE(st.batches.size() == 3);
    CHECK(st.batches[1].skipped);
    CHECK(st.warnings.size() == 1);
    CHECK(st.batches[0].size == 3);
    CHECK(st.batches[0].failures == 0);
    CHECK(st.batches[0].mean_latency_seconds > 0);

    const auto pr = run_pressure_trial(server.endpoint(), std::vector<UploadImage>(30, up), 8);
    CHECK(pr.ok());
    CHECK(pr.completed == 30);
    REQUIRE(pr.series.size() == 30);
    for (std::size_t i = 1; i < pr.series.size(); ++i) {
        CHECK(pr.series[i].first >= pr.series[i - 1].first);
        CHECK(pr.series[i].second == i + 1);
    }
    CHECK(pr.r_squared >= 0);
    CHECK(pr.r_squared <= 1);

    const auto empty = run_pressure_trial(server.endpoint(), {}, 8);
    CHECK(empty.ok());
    CHECK(empty.series.empty());

    const auto bad = make_upload(PImage{"t", PixelMatrix{3, 3, ColorMode::Grey, std::vector<std::uint8_t>(9)}}, "t", "pgm");
    CHECK(run_pressure_trial(server.endpoint(), {bad}, 1).failed == 1);
    server.stop();
}

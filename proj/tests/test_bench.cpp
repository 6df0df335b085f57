#include <doctest.h>

#include <sstream>

#include "icp/bench.hpp"
#include "icp/error.hpp"
#include "icp/stats.hpp"
#include "icp/synth.hpp"
#include "support.hpp"

using namespace icp;

namespace {

// Minimal RFC 4180 reader used to check that reports parse back.
std::vector<std::vector<std::string>> parse_csv(const std::string& text, std::vector<std::string>& comments) {
    std::vector<std::vector<std::string>> rows;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '#') {
            const auto nl = text.find('\n', i);
            comments.push_back(text.substr(i, nl - i));
            i = nl + 1;
            continue;
        }
        std::vector<std::string> row(1);
        bool quoted = false;
        for (; i < text.size(); ++i) {
            const char c = text[i];
            if (quoted) {
                if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') row.back() += '"', ++i;
                else if (c == '"') quoted = false;
                else row.back() += c;
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                row.emplace_back();
            } else if (c == '\n') {
                ++i;
                break;
            } else {
                row.back() += c;
            }
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

TEST_CASE("summary statistics") {
    const std::vector<double> v = {2, 4, 4, 4, 5, 5, 7, 9};
    CHECK(stats::mean(v) == doctest::Approx(5));
    CHECK(stats::stddev(v) == doctest::Approx(2.1380899));
    CHECK(stats::coefficient_of_variation(v) == doctest::Approx(2.1380899 / 5));
    CHECK(stats::median(v) == doctest::Approx(4.5));
    CHECK(stats::median(std::vector<double>{3, 1, 2}) == 2);
    CHECK(stats::stddev(std::vector<double>{1}) == 0);

    const std::vector<double> x = {0, 1, 2, 3, 4}, line = {1, 3, 5, 7, 9}, noisy = {1, 2, 1, 2, 1};
    CHECK(stats::r_squared(x, line) == doctest::Approx(1.0));
    CHECK(stats::r_squared(x, noisy) == doctest::Approx(0.0));
    CHECK(stats::r_squared(std::vector<double>{1, 2}, std::vector<double>{5, 1}) == 1.0);
    REQUIRE_ERROR_CODE(stats::r_squared(x, std::vector<double>{1}), ErrorCode::InvalidArgument);
}

TEST_CASE("reports serialize to parseable csv") {
    bench::BenchReport r("demo", {"name", "value"});
    r.note("context", "multi\nline");
    r.add_row({"plain", "1"});
    r.add_row({"with,comma \"q\"", "2.5"});
    REQUIRE_ERROR_CODE(r.add_row({"short"}), ErrorCode::InvalidArgument);
    std::vector<std::string> comments;
    const auto rows = parse_csv(r.to_csv(), comments);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == std::vector<std::string>{"name", "value"});
    CHECK(rows[2][0] == "with,comma \"q\"");
    CHECK(comments.size() == 5);
    CHECK(comments[0] == "# experiment: demo");
    CHECK(comments.back() == "# context: multi line");
}

TEST_CASE("environment stamp") {
    const auto env = bench::environment_stamp();
    CHECK(env.logical_cores >= 1);
    CHECK(env.physical_cores >= 1);
    CHECK(env.physical_cores <= env.logical_cores);
    CHECK(env.timestamp.size() == 20);
}

TEST_CASE("bench_input measures every size") {
    test::TempDir dir, work;
    synth::write_pgm_directory(dir.path(), 30, 16, 16, 4);
    const auto r = bench::bench_input(dir.path(), {1, 10, 30}, work.path(), 1);
    REQUIRE(r.rows.size() == 3);
    CHECK(r.report.rows.size() == 3);
    for (const auto& row : r.rows) {
        CHECK(row.loose_cold_seconds > 0);
        CHECK(row.store_warm_seconds > 0);
    }
    REQUIRE_ERROR_CODE(bench::bench_input(dir.path(), {31}, work.path(), 1), ErrorCode::InsufficientFiles);
    REQUIRE_ERROR_CODE(bench::bench_input(dir.path(), {}, work.path(), 1), ErrorCode::InvalidArgument);
}

TEST_CASE("bench_scaling keeps one digest across worker counts") {
    BigImage store;
    for (auto& img : synth::texture_dataset(12, 32, 32, 2)) store.append(img);
    const auto r = bench::bench_scaling(store, Algorithm::Harris, {1, 2, 3});
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[0].speedup == 1.0);
    for (const auto& row : r.rows) CHECK(row.digest == r.rows[0].digest);
    CHECK(bench::auto_blocksize(store, 3) == store.data_size() / 24);
}

TEST_CASE("trial reports") {
    dicp::StabilityResult st;
    st.batches = {{0, 10, 0.5, 0, false}, {1, 0, 0, 0, true}, {2, 10, 0.7, 0, false}};
    st.warnings = {"batch 1 is empty; skipped"};
    CHECK(bench::stability_cv(st) == doctest::Approx(stats::stddev(std::vector<double>{0.5, 0.7}) / 0.6));
    CHECK(bench::stability_report(st).rows.size() == 3);

    dicp::PressureResult pr;
    pr.series = {{0.1, 1}, {0.2, 2}};
    pr.completed = 2;
    const auto rep = bench::pressure_report(pr);
    CHECK(rep.rows.size() == 2);
    CHECK(rep.columns.back() == "r_squared");
}

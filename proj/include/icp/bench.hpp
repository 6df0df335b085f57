#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "icp/bigimage.hpp"
#include "icp/features.hpp"
#include "icp/server.hpp"

namespace icp::bench {

struct EnvironmentStamp {
    std::size_t logical_cores = 0;   // usable by this process
    std::size_t physical_cores = 0;  // distinct cores among those
    std::string timestamp;           // UTC, ISO 8601
};

EnvironmentStamp environment_stamp();

// Distinct (package, core) pairs among the CPUs this process may run on.
// Falls back to the logical count when the topology is unreadable.
std::size_t physical_core_count();

// CSV report: '#'-prefixed metadata lines, one header row, data rows.
struct BenchReport {
    std::string experiment;
    EnvironmentStamp environment;
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    BenchReport(std::string experiment, std::vector<std::string> columns);

    void note(std::string key, std::string value);
    // Throws InvalidArgument unless the row has one cell per column.
    void add_row(std::vector<std::string> row);
    std::string to_csv() const;
    void write(const std::filesystem::path& path) const;
};

std::string format_double(double value);

struct InputRow {
    std::size_t n = 0;
    double loose_cold_seconds = 0;
    double store_cold_seconds = 0;
    double loose_warm_seconds = 0;
    double store_warm_seconds = 0;

    double cold_ratio() const { return store_cold_seconds > 0 ? loose_cold_seconds / store_cold_seconds : 0; }
    double warm_ratio() const { return store_warm_seconds > 0 ? loose_warm_seconds / store_warm_seconds : 0; }
};

struct InputBench {
    std::vector<InputRow> rows;
    BenchReport report;
};

// For each N, times (a) open+read+decode of the first N PNM files of dir in
// name order and (b) load plus sequential decode of a store pre-packed from
// those N files under work_dir. Packing is not timed. Each timing is the
// median of `runs`; the cold variant drops the page cache for the files
// first (advisory, best effort). Throws InsufficientFiles when dir holds
// fewer than max(N) files.
InputBench bench_input(const std::filesystem::path& dir, const std::vector<std::size_t>& sizes,
                       const std::filesystem::path& work_dir, std::size_t runs = 3);

struct ScalingRow {
    std::size_t workers = 0;
    double wall_seconds = 0;
    double speedup = 0;  // wall(workers = first entry) / wall
    std::uint64_t digest = 0;
};

struct ScalingBench {
    std::vector<ScalingRow> rows;
    BenchReport report;
};

// Runs the whole store through run_job once per worker count. A blocksize of
// 0 picks one that yields eight groups per worker at the largest count.
ScalingBench bench_scaling(const BigImage& store, Algorithm algorithm, const std::vector<std::size_t>& worker_counts,
                           std::uint64_t blocksize = 0, std::size_t runs = 1);

std::uint64_t auto_blocksize(const BigImage& store, std::size_t max_workers);

BenchReport stability_report(const dicp::StabilityResult& result);
BenchReport pressure_report(const dicp::PressureResult& result);

// Coefficient of variation of the per-batch mean latency, skipped batches
// excluded.
double stability_cv(const dicp::StabilityResult& result);

// Drops cached pages of a file if the kernel honours the hint.
void drop_cache_hint(const std::filesystem::path& path);

}  // namespace icp::bench

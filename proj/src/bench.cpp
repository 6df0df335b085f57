#include "icp/bench.hpp"

#include <fcntl.h>
#include <sched.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "icp/byte_store.hpp"
#include "icp/engine.hpp"
#include "icp/error.hpp"
#include "icp/stats.hpp"

namespace icp::bench {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

std::set<int> allowed_cpus() {
    std::set<int> cpus;
    cpu_set_t set;
    CPU_ZERO(&set);
    if (sched_getaffinity(0, sizeof set, &set) == 0) {
        for (int i = 0; i < CPU_SETSIZE; ++i) {
            if (CPU_ISSET(i, &set)) cpus.insert(i);
        }
    }
    return cpus;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

std::size_t physical_core_count() {
    const auto cpus = allowed_cpus();
    const std::size_t logical = cpus.empty() ? std::max(1u, std::thread::hardware_concurrency()) : cpus.size();

    std::ifstream in("/proc/cpuinfo");
    std::set<std::pair<int, int>> cores;
    int processor = -1, package = 0, core = -1;
    auto flush = [&] {
        if (processor >= 0 && core >= 0 && (cpus.empty() || cpus.count(processor))) cores.emplace(package, core);
        processor = -1;
        package = 0;
        core = -1;
    };
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) {
            flush();
            continue;
        }
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string key = line.substr(0, colon);
        key.erase(key.find_last_not_of(" \t") + 1);
        const int value = std::atoi(line.c_str() + colon + 1);
        if (key == "processor") processor = value;
        else if (key == "physical id") package = value;
        else if (key == "core id") core = value;
    }
    flush();
    if (cores.empty()) return logical;
    return std::min(cores.size(), logical);
}

EnvironmentStamp environment_stamp() {
    EnvironmentStamp s;
    const auto cpus = allowed_cpus();
    s.logical_cores = cpus.empty() ? std::max(1u, std::thread::hardware_concurrency()) : cpus.size();
    s.physical_cores = physical_core_count();
    const std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
    s.timestamp = buf;
    return s;
}

BenchReport::BenchReport(std::string experiment_id, std::vector<std::string> cols)
    : experiment(std::move(experiment_id)), environment(environment_stamp()), columns(std::move(cols)) {}

void BenchReport::note(std::string key, std::string value) { metadata.emplace_back(std::move(key), std::move(value)); }

void BenchReport::add_row(std::vector<std::string> row) {
    if (row.size() != columns.size()) {
        throw Error(ErrorCode::InvalidArgument, "row has " + std::to_string(row.size()) + " cells, expected " +
                                                    std::to_string(columns.size()));
    }
    rows.push_back(std::move(row));
}

std::string BenchReport::to_csv() const {
    std::ostringstream out;
    out << "# experiment: " << experiment << '\n';
    out << "# timestamp: " << environment.timestamp << '\n';
    out << "# logical_cores: " << environment.logical_cores << '\n';
    out << "# physical_cores: " << environment.physical_cores << '\n';
    for (const auto& [k, v] : metadata) {
        std::string flat = v;
        std::replace(flat.begin(), flat.end(), '\n', ' ');
        out << "# " << k << ": " << flat << '\n';
    }
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_escape(cells[i]);
        out << '\n';
    };
    emit(columns);
    for (const auto& r : rows) emit(r);
    return out.str();
}

void BenchReport::write(const fs::path& path) const {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const std::string text = to_csv();
    io::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string format_double(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 9);
    return ec == std::errc{} ? std::string(buf, end) : std::string("nan");
}

void drop_cache_hint(const fs::path& path) {
    const int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0) return;
    ::fdatasync(fd);
    ::posix_fadvise(fd, 0, 0, POSIX_FADV_DONTNEED);
    ::close(fd);
}

namespace {

std::vector<fs::path> list_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

// Touches the decoded pixels so the work cannot be skipped.
std::uint64_t fold(const PImage& img) {
    return img.matrix.data.empty() ? 0 : img.matrix.data.front() + img.matrix.data.back() + img.matrix.width;
}

double time_loose(const std::vector<fs::path>& files, std::size_t n, bool cold, std::uint64_t& sink) {
    if (cold) {
        for (std::size_t i = 0; i < n; ++i) drop_cache_hint(files[i]);
    }
    const auto t0 = Clock::now();
    for (std::size_t i = 0; i < n; ++i) {
        sink += fold(decode_pnm(io::read_file(files[i]), files[i].filename().string()));
    }
    return seconds_since(t0);
}

double time_store(const StorePaths& paths, bool cold, std::uint64_t& sink) {
    if (cold) {
        drop_cache_hint(paths.data);
        drop_cache_hint(paths.index);
    }
    const auto t0 = Clock::now();
    const BigImage store = BigImage::load(paths.data, paths.index);
    store.for_each([&](const IndexEntry&, PImage&& img) { sink += fold(img); });
    return seconds_since(t0);
}

}  // namespace

InputBench bench_input(const fs::path& dir, const std::vector<std::size_t>& sizes, const fs::path& work_dir,
                       std::size_t runs) {
    if (sizes.empty()) throw Error(ErrorCode::InvalidArgument, "no sizes requested");
    if (runs == 0) throw Error(ErrorCode::InvalidArgument, "runs must be positive");
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::Io, "not a directory: " + dir.string());
    const auto files = list_files(dir);
    const std::size_t max_n = *std::max_element(sizes.begin(), sizes.end());
    if (files.size() < max_n) {
        throw Error(ErrorCode::InsufficientFiles, dir.string() + " holds " + std::to_string(files.size()) +
                                                      " files, " + std::to_string(max_n) + " needed");
    }

    fs::create_directories(work_dir);
    InputBench result{{}, BenchReport("bench_input", {"n", "loose_cold_s", "store_cold_s", "ratio_cold",
                                                      "loose_warm_s", "store_warm_s", "ratio_warm"})};
    result.report.note("dir", dir.string());
    result.report.note("runs", std::to_string(runs) + " (median reported)");
    result.report.note("loose_timing", "open+read+decode of each file");
    result.report.note("store_timing", "open of data and index files plus sequential decode; packing excluded");
    result.report.note("cold_control", "posix_fadvise DONTNEED on every input file before each cold run");

    std::uint64_t sink = 0;
    for (const std::size_t n : sizes) {
        // Pack the first n files.
        const auto paths = store_paths(work_dir, "input_" + std::to_string(n));
        {
            BigImage store;
            for (std::size_t i = 0; i < n; ++i) {
                store.append(decode_pnm(io::read_file(files[i]), files[i].filename().string()));
            }
            store.save(paths.data, paths.index);
        }

        std::vector<double> lc, sc, lw, sw;
        for (std::size_t r = 0; r < runs; ++r) {
            lc.push_back(time_loose(files, n, true, sink));
            sc.push_back(time_store(paths, true, sink));
            lw.push_back(time_loose(files, n, false, sink));
            sw.push_back(time_store(paths, false, sink));
        }
        InputRow row{n, stats::median(lc), stats::median(sc), stats::median(lw), stats::median(sw)};
        result.rows.push_back(row);
        result.report.add_row({std::to_string(n), format_double(row.loose_cold_seconds),
                               format_double(row.store_cold_seconds), format_double(row.cold_ratio()),
                               format_double(row.loose_warm_seconds), format_double(row.store_warm_seconds),
                               format_double(row.warm_ratio())});
    }
    result.report.note("checksum", std::to_string(sink));
    return result;
}

std::uint64_t auto_blocksize(const BigImage& store, std::size_t max_workers) {
    const std::uint64_t target_groups = 8 * std::max<std::size_t>(1, max_workers);
    return std::max<std::uint64_t>(1, store.data_size() / target_groups);
}

ScalingBench bench_scaling(const BigImage& store, Algorithm algorithm, const std::vector<std::size_t>& worker_counts,
                           std::uint64_t blocksize, std::size_t runs) {
    if (worker_counts.empty()) throw Error(ErrorCode::InvalidArgument, "no worker counts requested");
    if (runs == 0) throw Error(ErrorCode::InvalidArgument, "runs must be positive");
    const std::size_t max_workers = *std::max_element(worker_counts.begin(), worker_counts.end());
    if (blocksize == 0) blocksize = auto_blocksize(store, max_workers);

    ScalingBench result{{}, BenchReport("bench_scaling", {"workers", "wall_s", "speedup", "groups", "digest"})};
    result.report.note("algorithm", std::string(to_string(algorithm)));
    result.report.note("images", std::to_string(store.size()));
    result.report.note("blocksize", std::to_string(blocksize));
    result.report.note("runs", std::to_string(runs) + " (median reported)");
    result.report.note("baseline", "first worker count; the serial run when it is 1");

    std::size_t groups = 0;
    for (const std::size_t w : worker_counts) {
        std::vector<double> walls;
        std::uint64_t digest = 0;
        for (std::size_t r = 0; r < runs; ++r) {
            const JobResult job = run_job(store, blocksize, algorithm, AlphaSelection{}, w);
            walls.push_back(job.stats.wall_seconds);
            digest = output_digest(job.output);
            groups = job.stats.groups;
        }
        result.rows.push_back({w, stats::median(walls), 0, digest});
    }
    const double base = result.rows.front().wall_seconds;
    for (auto& row : result.rows) {
        row.speedup = row.wall_seconds > 0 ? base / row.wall_seconds : 0;
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(row.digest));
        result.report.add_row({std::to_string(row.workers), format_double(row.wall_seconds),
                               format_double(row.speedup), std::to_string(groups), hex});
    }
    return result;
}

double stability_cv(const dicp::StabilityResult& result) {
    std::vector<double> means;
    for (const auto& b : result.batches) {
        if (!b.skipped) means.push_back(b.mean_latency_seconds);
    }
    return stats::coefficient_of_variation(means);
}

BenchReport stability_report(const dicp::StabilityResult& result) {
    BenchReport report("bench_stability", {"batch", "size", "mean_latency_s", "failures", "skipped"});
    for (const auto& w : result.warnings) report.note("warning", w);
    report.note("cv_of_batch_means", format_double(stability_cv(result)));
    for (const auto& b : result.batches) {
        report.add_row({std::to_string(b.batch), std::to_string(b.size), format_double(b.mean_latency_seconds),
                        std::to_string(b.failures), b.skipped ? "1" : "0"});
    }
    return report;
}

BenchReport pressure_report(const dicp::PressureResult& result) {
    BenchReport report("bench_pressure", {"elapsed_s", "completed", "r_squared"});
    report.note("completed", std::to_string(result.completed));
    report.note("failed", std::to_string(result.failed));
    report.note("total_s", format_double(result.total_seconds));
    report.note("status", result.ok() ? "ok" : "failed");
    const std::string r2 = format_double(result.r_squared);
    for (const auto& [t, n] : result.series) report.add_row({format_double(t), std::to_string(n), r2});
    return report;
}

}  // namespace icp::bench

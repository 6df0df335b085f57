#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "icp/bigimage.hpp"
#include "icp/dispatch.hpp"
#include "icp/worker_pool.hpp"

namespace icp::dicp {

struct ServiceOptions {
    std::size_t max_inflight = 64;
    std::size_t payload_limit = kDefaultPayloadLimit;
    std::uint64_t staging_threshold = kUnlimitedThreshold;
};

// Master proxy plus matching module. For every request the storage path
// appends the payload to the staging store while the matching path looks up
// the rule table and, on a match, runs the algorithm on a pool of
// max_inflight threads (excess work queues FIFO). Both paths finish before
// the response is built, and a DispatchRecord is logged either way.
class DicpService {
public:
    DicpService(MatchConfig config, ServiceOptions options = {});

    Response handle_request(Request request);
    // Parses then handles; a frame that fails to parse yields an ERR response
    // and a Failed record.
    Response handle_frame(std::span<const std::uint8_t> frame);

    std::vector<DispatchRecord> records() const;
    std::size_t staging_size() const;
    std::vector<IndexEntry> staging_entries() const;
    PImage staged_image(std::string_view name) const;
    void save_staging(const StorePaths& paths) const;

    const MatchConfig& config() const noexcept { return config_; }
    const ServiceOptions& options() const noexcept { return options_; }
    // Highest number of algorithm runs observed executing at once.
    std::size_t peak_inflight() const noexcept { return peak_inflight_.load(); }

    // Staging store key for a request: "<id>-<filename>.<extension>".
    static std::string staging_name(const Request& request);

private:
    void log(DispatchRecord record);

    const MatchConfig config_;
    const ServiceOptions options_;

    mutable std::mutex staging_mutex_;
    BigImage staging_;

    mutable std::mutex log_mutex_;
    std::vector<DispatchRecord> log_;

    std::atomic<std::uint64_t> next_id_{1};
    std::atomic<std::size_t> inflight_{0};
    std::atomic<std::size_t> peak_inflight_{0};

    WorkerPool algorithms_;
};

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;

    // "host:port" or ":port".
    static Endpoint parse(std::string_view text);
    std::string to_string() const { return host + ":" + std::to_string(port); }
};

// TCP front end: one request per connection, one handler thread each.
class DicpServer {
public:
    explicit DicpServer(DicpService& service, Endpoint listen = {});
    ~DicpServer();

    DicpServer(const DicpServer&) = delete;
    DicpServer& operator=(const DicpServer&) = delete;

    void start();
    // Stops accepting and waits for in-flight connections to finish.
    void stop();

    Endpoint endpoint() const { return {listen_.host, bound_port_}; }
    std::uint64_t connections_served() const noexcept { return served_.load(); }

private:
    void accept_loop();
    void serve_connection(int fd);

    DicpService& service_;
    Endpoint listen_;
    std::uint16_t bound_port_ = 0;
    int listen_fd_ = -1;
    std::atomic<bool> running_{false};
    std::thread acceptor_;

    std::mutex handlers_mutex_;
    std::condition_variable handlers_done_;
    std::size_t active_handlers_ = 0;
    std::atomic<std::uint64_t> served_{0};
};

// Sends one frame and reads the full response. Throws Transport on socket
// failure and BadFrame on a malformed reply.
Response send_frame(const Endpoint& endpoint, std::span<const std::uint8_t> frame,
                    std::chrono::milliseconds timeout = std::chrono::seconds(60));

struct UploadImage {
    std::string filename;
    std::string extension;
    std::vector<std::uint8_t> record;
};

UploadImage make_upload(const PImage& img, std::string filename, std::string extension);

struct BatchResult {
    std::size_t batch = 0;  // 0-based position in the trial
    std::size_t size = 0;
    double mean_latency_seconds = 0;
    std::size_t failures = 0;
    bool skipped = false;  // empty batch
};

struct StabilityResult {
    std::vector<BatchResult> batches;
    std::vector<std::string> warnings;
};

// Uploads each batch (its images concurrently, up to `concurrency`
// connections), waits for it to finish, pauses `gap`, and records the mean
// per-image latency of every batch.
StabilityResult run_stability_trial(const Endpoint& endpoint, const std::vector<std::vector<UploadImage>>& batches,
                                    std::size_t concurrency = 16,
                                    std::chrono::milliseconds gap = std::chrono::milliseconds(20));

struct PressureResult {
    // (seconds since start, completed requests) at every completion.
    std::vector<std::pair<double, std::size_t>> series;
    std::size_t completed = 0;
    std::size_t failed = 0;
    double total_seconds = 0;
    double r_squared = 1.0;

    bool ok() const noexcept { return failed == 0; }
};

// Uploads every image without pacing over `concurrency` connections.
PressureResult run_pressure_trial(const Endpoint& endpoint, const std::vector<UploadImage>& images,
                                  std::size_t concurrency = 16);

}  // namespace icp::dicp

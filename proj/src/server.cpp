#include "icp/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <future>

#include "icp/byte_store.hpp"
#include "icp/error.hpp"
#include "icp/stats.hpp"

namespace icp::dicp {

using Clock = DispatchRecord::Clock;

DicpService::DicpService(MatchConfig config, ServiceOptions options)
    : config_(std::move(config)),
      options_(options),
      staging_(options.staging_threshold),
      algorithms_(options.max_inflight == 0 ? 1 : options.max_inflight) {
    if (options.max_inflight == 0) throw Error(ErrorCode::InvalidArgument, "max_inflight must be at least 1");
}

std::string DicpService::staging_name(const Request& request) {
    return std::to_string(request.request_id) + "-" + request.filename + "." + request.extension;
}

Response DicpService::handle_request(Request req) {
    DispatchRecord rec;
    rec.enqueued = Clock::now();
    if (req.request_id == 0) req.request_id = next_id_.fetch_add(1);
    rec.request_id = req.request_id;
    rec.rule = match_rule(req.filename, req.extension, config_);

    // Matching path: runs on the algorithm pool while this thread stores.
    std::future<ImageFeatures> matched;
    Clock::time_point started{};
    if (rec.rule) {
        const Algorithm algorithm = config_.rules[*rec.rule].algorithm;
        matched = algorithms_.submit([this, algorithm, &req, &started] {
            started = Clock::now();
            const std::size_t now_running = inflight_.fetch_add(1) + 1;
            std::size_t peak = peak_inflight_.load();
            while (now_running > peak && !peak_inflight_.compare_exchange_weak(peak, now_running)) {
            }
            struct Leave {
                std::atomic<std::size_t>& n;
                ~Leave() { n.fetch_sub(1); }
            } leave{inflight_};
            return extract_features(algorithm, req.image);
        });
    }

    // Storage path: unconditional, whatever the match outcome.
    try {
        PImage staged{staging_name(req), req.image.matrix};
        std::lock_guard lock(staging_mutex_);
        rec.staging_offset = staging_.append(staged).start_offset;
    } catch (const std::exception& e) {
        rec.storage_error = e.what();
    } catch (...) {
        rec.storage_error = "unknown storage failure";
    }

    Response response;
    if (rec.rule) {
        try {
            response = ok_response(matched.get());
            rec.outcome = Outcome::Completed;
        } catch (const Error& e) {
            response = error_response(wire_error_code(e.code()), e.what());
            rec.outcome = Outcome::Failed;
            rec.error = e.what();
        } catch (const std::exception& e) {
            response = error_response("INTERNAL", e.what());
            rec.outcome = Outcome::Failed;
            rec.error = e.what();
        }
        rec.started = started;
    } else {
        response = no_match_response();
        rec.outcome = Outcome::NoMatch;
        rec.started = rec.enqueued;
    }
    rec.finished = Clock::now();
    log(std::move(rec));
    return response;
}

Response DicpService::handle_frame(std::span<const std::uint8_t> frame) {
    const auto enqueued = Clock::now();
    Request req;
    try {
        req = parse_frame(frame, options_.payload_limit);
    } catch (const Error& e) {
        DispatchRecord rec;
        rec.request_id = next_id_.fetch_add(1);
        rec.enqueued = rec.started = enqueued;
        rec.outcome = Outcome::Failed;
        rec.error = e.what();
        rec.finished = Clock::now();
        log(std::move(rec));
        return error_response(wire_error_code(e.code()), e.what());
    }
    return handle_request(std::move(req));
}

void DicpService::log(DispatchRecord record) {
    std::lock_guard lock(log_mutex_);
    log_.push_back(std::move(record));
}

std::vector<DispatchRecord> DicpService::records() const {
    std::lock_guard lock(log_mutex_);
    return log_;
}

std::size_t DicpService::staging_size() const {
    std::lock_guard lock(staging_mutex_);
    return staging_.size();
}

std::vector<IndexEntry> DicpService::staging_entries() const {
    std::lock_guard lock(staging_mutex_);
    return staging_.entries();
}

PImage DicpService::staged_image(std::string_view name) const {
    std::lock_guard lock(staging_mutex_);
    return staging_.lookup(name);
}

void DicpService::save_staging(const StorePaths& paths) const {
    std::lock_guard lock(staging_mutex_);
    staging_.save(paths.data, paths.index);
}

Endpoint Endpoint::parse(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos) throw Error(ErrorCode::InvalidArgument, "expected host:port");
    Endpoint ep;
    if (colon > 0) ep.host.assign(text.substr(0, colon));
    const auto port = text.substr(colon + 1);
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
    if (ec != std::errc{} || ptr != port.data() + port.size() || value > 65535) {
        throw Error(ErrorCode::InvalidArgument, "bad port '" + std::string(port) + "'");
    }
    ep.port = static_cast<std::uint16_t>(value);
    return ep;
}

namespace {

sockaddr_in to_sockaddr(const Endpoint& ep) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    const std::string host = ep.host == "localhost" || ep.host.empty() ? "127.0.0.1" : ep.host;
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        throw Error(ErrorCode::InvalidArgument, "not an IPv4 address: " + ep.host);
    }
    return addr;
}

[[noreturn]] void throw_socket(const std::string& what) {
    throw Error(ErrorCode::Transport, what + ": " + std::strerror(errno));
}

void set_timeout(int fd, std::chrono::milliseconds timeout) {
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

bool send_all(int fd, std::span<const std::uint8_t> bytes) {
    std::size_t done = 0;
    while (done < bytes.size()) {
        ssize_t n = ::send(fd, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        done += static_cast<std::size_t>(n);
    }
    return true;
}

// Appends up to `limit` more bytes; returns false on EOF, error or timeout.
bool recv_some(int fd, std::vector<std::uint8_t>& buffer, std::size_t limit) {
    std::uint8_t chunk[64 * 1024];
    for (;;) {
        ssize_t n = ::recv(fd, chunk, std::min(sizeof chunk, limit), 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        buffer.insert(buffer.end(), chunk, chunk + n);
        return true;
    }
}

}  // namespace

DicpServer::DicpServer(DicpService& service, Endpoint listen) : service_(service), listen_(std::move(listen)) {}

DicpServer::~DicpServer() { stop(); }

void DicpServer::start() {
    if (running_) return;
    const sockaddr_in addr = to_sockaddr(listen_);
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (listen_fd_ < 0) throw_socket("socket");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
        const int err = errno;
        ::close(listen_fd_);
        listen_fd_ = -1;
        errno = err;
        throw_socket("bind " + listen_.to_string());
    }
    if (::listen(listen_fd_, 1024) != 0) throw_socket("listen");
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    bound_port_ = ntohs(bound.sin_port);
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
}

void DicpServer::stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    if (acceptor_.joinable()) acceptor_.join();
    ::close(listen_fd_);
    listen_fd_ = -1;
    std::unique_lock lock(handlers_mutex_);
    handlers_done_.wait(lock, [this] { return active_handlers_ == 0; });
}

void DicpServer::accept_loop() {
    while (running_) {
        const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0) {
            if (!running_) break;
            if (errno == EINTR || errno == ECONNABORTED || errno == EMFILE || errno == ENFILE) continue;
            break;
        }
        {
            std::lock_guard lock(handlers_mutex_);
            ++active_handlers_;
        }
        std::thread([this, fd] {
            try {
                serve_connection(fd);
            } catch (...) {
            }
            ::close(fd);
            served_.fetch_add(1);
            std::lock_guard lock(handlers_mutex_);
            if (--active_handlers_ == 0) handlers_done_.notify_all();
        }).detach();
    }
}

void DicpServer::serve_connection(int fd) {
    set_timeout(fd, std::chrono::seconds(30));
    std::vector<std::uint8_t> buffer;
    std::size_t newline = std::string::npos;
    while (newline == std::string::npos) {
        if (buffer.size() > kMaxHeaderBytes) break;
        if (!recv_some(fd, buffer, kMaxHeaderBytes + 1 - buffer.size() + 1)) break;
        const auto* nl = static_cast<const std::uint8_t*>(std::memchr(buffer.data(), '\n', buffer.size()));
        if (nl) newline = static_cast<std::size_t>(nl - buffer.data());
    }

    if (newline != std::string::npos) {
        std::size_t expected = 0;
        bool header_ok = true;
        try {
            const auto h = parse_frame_header(std::string_view(reinterpret_cast<const char*>(buffer.data()), newline),
                                              service_.options().payload_limit);
            expected = newline + 1 + h.payload_length;
        } catch (const Error&) {
            header_ok = false;
            buffer.resize(newline + 1);
        }
        while (header_ok && buffer.size() < expected) {
            if (!recv_some(fd, buffer, expected - buffer.size())) break;
        }
        if (header_ok && buffer.size() > expected) buffer.resize(expected);
    }

    const Response response = service_.handle_frame(buffer);
    send_all(fd, encode_response(response));
    ::shutdown(fd, SHUT_WR);
    // Consume whatever the client still sends so closing does not reset the
    // connection before it has read the response.
    set_timeout(fd, std::chrono::seconds(2));
    std::uint8_t sink[16 * 1024];
    for (std::size_t drained = 0; drained < (64u << 20);) {
        const ssize_t n = ::recv(fd, sink, sizeof sink, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        drained += static_cast<std::size_t>(n);
    }
}

Response send_frame(const Endpoint& endpoint, std::span<const std::uint8_t> frame, std::chrono::milliseconds timeout) {
    const sockaddr_in addr = to_sockaddr(endpoint);
    io::FileHandle fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (fd.get() < 0) throw_socket("socket");
    set_timeout(fd.get(), timeout);
    int one = 1;
    ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    if (::connect(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
        throw_socket("connect " + endpoint.to_string());
    }
    if (!send_all(fd.get(), frame)) throw_socket("send");
    ::shutdown(fd.get(), SHUT_WR);
    std::vector<std::uint8_t> reply;
    while (recv_some(fd.get(), reply, 1 << 20)) {
    }
    if (reply.empty()) throw Error(ErrorCode::Transport, "connection closed without a response");
    return parse_response(reply);
}

UploadImage make_upload(const PImage& img, std::string filename, std::string extension) {
    return UploadImage{std::move(filename), std::move(extension), encode_record(img)};
}

namespace {

struct Outcome1 {
    bool ok = false;
    double seconds = 0;
};

Outcome1 upload(const Endpoint& endpoint, const UploadImage& img) {
    const auto frame = encode_frame(img.filename, img.extension, img.record);
    const auto t0 = Clock::now();
    Outcome1 out;
    try {
        const Response r = send_frame(endpoint, frame);
        out.ok = r.kind == ResponseKind::Ok;
    } catch (const Error&) {
        out.ok = false;
    }
    out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return out;
}

// Runs fn(i) for i in [0, n) on up to `threads` threads.
template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F fn) {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t count = std::max<std::size_t>(1, std::min(threads, n));
    for (std::size_t t = 0; t < count; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace

StabilityResult run_stability_trial(const Endpoint& endpoint, const std::vector<std::vector<UploadImage>>& batches,
                                    std::size_t concurrency, std::chrono::milliseconds gap) {
    StabilityResult result;
    for (std::size_t b = 0; b < batches.size(); ++b) {
        BatchResult br;
        br.batch = b;
        br.size = batches[b].size();
        if (batches[b].empty()) {
            br.skipped = true;
            result.warnings.push_back("batch " + std::to_string(b) + " is empty; skipped");
            result.batches.push_back(br);
            continue;
        }
        std::vector<Outcome1> outcomes(br.size);
        parallel_for(br.size, concurrency, [&](std::size_t i) { outcomes[i] = upload(endpoint, batches[b][i]); });
        double total = 0;
        for (const auto& o : outcomes) {
            total += o.seconds;
            if (!o.ok) ++br.failures;
        }
        br.mean_latency_seconds = total / static_cast<double>(br.size);
        result.batches.push_back(br);
        if (b + 1 < batches.size()) std::this_thread::sleep_for(gap);
    }
    return result;
}

PressureResult run_pressure_trial(const Endpoint& endpoint, const std::vector<UploadImage>& images,
                                  std::size_t concurrency) {
    PressureResult result;
    if (images.empty()) return result;
    std::mutex mutex;
    const auto start = Clock::now();
    parallel_for(images.size(), concurrency, [&](std::size_t i) {
        const Outcome1 o = upload(endpoint, images[i]);
        std::lock_guard lock(mutex);
        if (!o.ok) {
            ++result.failed;
            return;
        }
        ++result.completed;
        result.series.emplace_back(std::chrono::duration<double>(Clock::now() - start).count(), result.completed);
    });
    result.total_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    std::vector<double> xs, ys;
    for (const auto& [t, n] : result.series) {
        xs.push_back(t);
        ys.push_back(static_cast<double>(n));
    }
    result.r_squared = stats::r_squared(xs, ys);
    return result;
}

}  // namespace icp::dicp

#include "icp/byte_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>

#include "icp/error.hpp"

namespace icp {

namespace io {

namespace {
std::atomic<std::uint64_t> g_open_count{0};

[[noreturn]] void throw_os(const std::string& what, const std::filesystem::path& path) {
    throw Error(ErrorCode::Io, what + " " + path.string() + ": " + std::strerror(errno));
}
}  // namespace

int open_file(const std::filesystem::path& path, int flags, int mode) {
    int fd = ::open(path.c_str(), flags | O_CLOEXEC, mode);
    if (fd < 0) throw_os("cannot open", path);
    g_open_count.fetch_add(1, std::memory_order_relaxed);
    return fd;
}

std::uint64_t file_open_count() noexcept { return g_open_count.load(std::memory_order_relaxed); }

FileHandle& FileHandle::operator=(FileHandle&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = other.release();
    }
    return *this;
}

FileHandle::~FileHandle() {
    if (fd_ >= 0) ::close(fd_);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    FileHandle fd(open_file(path, O_RDONLY));
    struct stat st {};
    if (::fstat(fd.get(), &st) != 0) throw_os("cannot stat", path);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(st.st_size));
    std::size_t done = 0;
    while (done < bytes.size()) {
        ssize_t n = ::read(fd.get(), bytes.data() + done, bytes.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw_os("cannot read", path);
        }
        if (n == 0) break;
        done += static_cast<std::size_t>(n);
    }
    bytes.resize(done);
    return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    FileHandle fd(open_file(path, O_WRONLY | O_CREAT | O_TRUNC));
    std::size_t done = 0;
    while (done < bytes.size()) {
        ssize_t n = ::write(fd.get(), bytes.data() + done, bytes.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw_os("cannot write", path);
        }
        done += static_cast<std::size_t>(n);
    }
}

}  // namespace io

std::size_t MemoryByteStore::read_at(std::uint64_t offset, std::span<std::uint8_t> out) const {
    if (offset >= bytes_.size()) return 0;
    const std::size_t n = std::min<std::uint64_t>(out.size(), bytes_.size() - offset);
    if (n) std::memcpy(out.data(), bytes_.data() + offset, n);
    return n;
}

void MemoryByteStore::append(std::span<const std::uint8_t> bytes) {
    bytes_.insert(bytes_.end(), bytes.begin(), bytes.end());
}

FileByteStore::FileByteStore(std::filesystem::path path, Mode mode) : path_(std::move(path)) {
    int flags = O_RDONLY;
    if (mode == Mode::ReadWrite) flags = O_RDWR | O_CREAT;
    if (mode == Mode::Truncate) flags = O_RDWR | O_CREAT | O_TRUNC;
    fd_ = io::FileHandle(io::open_file(path_, flags));
    struct stat st {};
    if (::fstat(fd_.get(), &st) != 0) {
        throw Error(ErrorCode::Io, "cannot stat " + path_.string() + ": " + std::strerror(errno));
    }
    size_ = static_cast<std::uint64_t>(st.st_size);
}

std::size_t FileByteStore::read_at(std::uint64_t offset, std::span<std::uint8_t> out) const {
    std::size_t done = 0;
    while (done < out.size()) {
        ssize_t n = ::pread(fd_.get(), out.data() + done, out.size() - done, static_cast<off_t>(offset + done));
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorCode::Io, "cannot read " + path_.string() + ": " + std::strerror(errno));
        }
        if (n == 0) break;
        done += static_cast<std::size_t>(n);
    }
    return done;
}

void FileByteStore::append(std::span<const std::uint8_t> bytes) {
    std::size_t done = 0;
    while (done < bytes.size()) {
        ssize_t n = ::pwrite(fd_.get(), bytes.data() + done, bytes.size() - done, static_cast<off_t>(size_ + done));
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorCode::Io, "cannot write " + path_.string() + ": " + std::strerror(errno));
        }
        done += static_cast<std::size_t>(n);
    }
    size_ += bytes.size();
}

void FileByteStore::flush() {
    if (::fdatasync(fd_.get()) != 0 && errno != EINVAL) {
        throw Error(ErrorCode::Io, "cannot sync " + path_.string() + ": " + std::strerror(errno));
    }
}

}  // namespace icp

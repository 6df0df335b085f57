#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace icp {

namespace io {

// Every file the library opens goes through open_file, so tests and the
// input-time benchmark can count handles.
int open_file(const std::filesystem::path& path, int flags, int mode = 0644);
std::uint64_t file_open_count() noexcept;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// RAII file descriptor.
class FileHandle {
public:
    FileHandle() = default;
    explicit FileHandle(int fd) noexcept : fd_(fd) {}
    FileHandle(FileHandle&& other) noexcept : fd_(other.release()) {}
    FileHandle& operator=(FileHandle&& other) noexcept;
    FileHandle(const FileHandle&) = delete;
    FileHandle& operator=(const FileHandle&) = delete;
    ~FileHandle();

    int get() const noexcept { return fd_; }
    int release() noexcept {
        int fd = fd_;
        fd_ = -1;
        return fd;
    }

private:
    int fd_ = -1;
};

}  // namespace io

// Positional byte storage behind a Big-Image data file. read_at is safe to
// call concurrently with other reads; append requires exclusive access.
class ByteStore {
public:
    virtual ~ByteStore() = default;

    virtual std::uint64_t size() const = 0;
    // Returns the number of bytes copied; short only at end of storage.
    virtual std::size_t read_at(std::uint64_t offset, std::span<std::uint8_t> out) const = 0;
    virtual void append(std::span<const std::uint8_t> bytes) = 0;
    virtual void flush() {}
    virtual std::optional<std::filesystem::path> file_path() const { return std::nullopt; }
};

class MemoryByteStore final : public ByteStore {
public:
    MemoryByteStore() = default;
    explicit MemoryByteStore(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

    std::uint64_t size() const override { return bytes_.size(); }
    std::size_t read_at(std::uint64_t offset, std::span<std::uint8_t> out) const override;
    void append(std::span<const std::uint8_t> bytes) override;

    const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
    std::vector<std::uint8_t>& mutable_bytes() noexcept { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class FileByteStore final : public ByteStore {
public:
    enum class Mode { ReadOnly, ReadWrite, Truncate };

    FileByteStore(std::filesystem::path path, Mode mode);

    std::uint64_t size() const override { return size_; }
    std::size_t read_at(std::uint64_t offset, std::span<std::uint8_t> out) const override;
    void append(std::span<const std::uint8_t> bytes) override;
    void flush() override;
    std::optional<std::filesystem::path> file_path() const override { return path_; }

private:
    std::filesystem::path path_;
    io::FileHandle fd_;
    std::uint64_t size_ = 0;
};

}  // namespace icp

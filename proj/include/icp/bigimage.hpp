#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "icp/byte_store.hpp"
#include "icp/pimage.hpp"

namespace icp {

// FNV-1a, 64-bit, over the UTF-8 bytes of the filename.
std::uint64_t filename_id(std::string_view name) noexcept;

struct IndexEntry {
    std::uint64_t id = 0;
    std::uint64_t start_offset = 0;
    std::uint64_t record_length = 0;
    std::string filename;

    bool operator==(const IndexEntry&) const = default;
};

// Id -> entry position table. Buckets are keyed by the low bits of the id and
// every probe compares the stored filename, so two names whose ids collide
// (fully or only in the bucket bits) still resolve to their own entries.
class BucketIndex {
public:
    BucketIndex() { buckets_.resize(16); }

    void insert(std::uint64_t id, std::size_t position);
    std::optional<std::size_t> find(std::uint64_t id, std::string_view name,
                                    const std::vector<IndexEntry>& entries) const;

    std::size_t bucket_count() const noexcept { return buckets_.size(); }
    std::size_t bucket_of(std::uint64_t id) const noexcept { return id & (buckets_.size() - 1); }
    std::size_t size() const noexcept { return size_; }
    void clear();

private:
    struct Slot {
        std::uint64_t id;
        std::size_t position;
    };
    void grow();

    std::vector<std::vector<Slot>> buckets_;
    std::size_t size_ = 0;
};

inline constexpr std::uint64_t kUnlimitedThreshold = std::numeric_limits<std::uint64_t>::max();
inline constexpr std::uint8_t kIndexVersion = 0x01;

// Packed container: a data blob of concatenated P-Image records and an
// insertion-ordered index of (id, start, length, filename).
//
// Single writer. Once no append is in progress, lookup/read/for_each may be
// called from any number of threads.
class BigImage {
public:
    explicit BigImage(std::uint64_t threshold = kUnlimitedThreshold);
    // Adopts an empty byte store (e.g. a file opened for writing).
    BigImage(std::unique_ptr<ByteStore> data, std::uint64_t threshold);

    BigImage(BigImage&&) noexcept = default;
    BigImage& operator=(BigImage&&) noexcept = default;

    // Builds a store from an existing index and data; every container
    // invariant is checked and IndexDataMismatch thrown on violation.
    static BigImage from_parts(std::vector<IndexEntry> entries, std::unique_ptr<ByteStore> data,
                               std::uint64_t threshold = kUnlimitedThreshold);

    static BigImage load(const std::filesystem::path& data_path, const std::filesystem::path& index_path,
                         std::uint64_t threshold = kUnlimitedThreshold);

    // Writes the index file in full. The data file is copied from the backing
    // store unless the store already lives at data_path.
    void save(const std::filesystem::path& data_path, const std::filesystem::path& index_path) const;

    const IndexEntry& append(const PImage& img);
    // Appends an already encoded record (used by the staging store).
    const IndexEntry& append_record(std::string filename, std::span<const std::uint8_t> record);

    const IndexEntry* find(std::string_view name) const;
    PImage lookup(std::string_view name) const;
    // One read of record_length bytes at start_offset.
    PImage read(const IndexEntry& entry) const;
    std::vector<std::uint8_t> read_raw(const IndexEntry& entry) const;

    // Sequential pass over the data in insertion order.
    void for_each(const std::function<void(const IndexEntry&, PImage&&)>& visit) const;
    std::vector<PImage> iterate() const;

    // Decodes every record and cross-checks it against its index entry.
    void verify() const;

    const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::uint64_t data_size() const noexcept { return data_size_; }
    std::uint64_t threshold() const noexcept { return threshold_; }
    const BucketIndex& index() const noexcept { return index_; }
    const ByteStore& data() const noexcept { return *data_; }

    std::vector<std::uint8_t> data_bytes() const;

private:
    std::vector<IndexEntry> entries_;
    BucketIndex index_;
    std::uint64_t data_size_ = 0;
    std::uint64_t threshold_ = kUnlimitedThreshold;
    std::unique_ptr<ByteStore> data_;
};

// Index file: "BIGX" | version u8 | entry_count u64 | entries of
// id u64 | start_offset u64 | record_length u64 | filename_len u16 | filename.
std::vector<std::uint8_t> encode_index(const std::vector<IndexEntry>& entries);
std::vector<IndexEntry> decode_index(std::span<const std::uint8_t> bytes);

struct StorePaths {
    std::filesystem::path data;
    std::filesystem::path index;
};

// <dir>/<name>.bigdata for part 0, <dir>/<name>.<part>.bigdata after rollover.
StorePaths store_paths(const std::filesystem::path& dir, std::string_view name, std::size_t part = 0);

// Resolves "<dir>/<name>" or either of its two files to both paths.
StorePaths resolve_store(const std::filesystem::path& path);

struct PackedStore {
    StorePaths paths;
    std::size_t entries = 0;
    std::uint64_t data_bytes = 0;
};

struct PackError {
    std::string file;
    std::string message;
};

struct PackResult {
    std::vector<PackedStore> stores;
    std::vector<PackError> errors;

    std::size_t total_entries() const;
    std::uint64_t total_bytes() const;
};

// Decodes every regular file of dir in lexicographic order and packs the
// results into one or more stores under out_dir. Files that fail to decode are
// reported in errors and skipped.
PackResult pack_directory(const std::filesystem::path& dir, const std::filesystem::path& out_dir,
                          std::string_view name, std::uint64_t threshold = kUnlimitedThreshold);

// Packs an in-memory list of images, applying the same rollover rule.
PackResult pack_images(const std::vector<PImage>& images, const std::filesystem::path& out_dir,
                       std::string_view name, std::uint64_t threshold = kUnlimitedThreshold);

}  // namespace icp

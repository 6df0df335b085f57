#include "icp/bigimage.hpp"

#include <algorithm>
#include <system_error>
#include <unordered_set>

#include "bytes.hpp"
#include "icp/error.hpp"

namespace icp {

namespace fs = std::filesystem;

std::uint64_t filename_id(std::string_view name) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

void BucketIndex::insert(std::uint64_t id, std::size_t position) {
    if (size_ + 1 > buckets_.size() * 2) grow();
    buckets_[bucket_of(id)].push_back(Slot{id, position});
    ++size_;
}

std::optional<std::size_t> BucketIndex::find(std::uint64_t id, std::string_view name,
                                             const std::vector<IndexEntry>& entries) const {
    for (const Slot& slot : buckets_[bucket_of(id)]) {
        if (slot.id == id && entries[slot.position].filename == name) return slot.position;
    }
    return std::nullopt;
}

void BucketIndex::clear() {
    buckets_.assign(16, {});
    size_ = 0;
}

void BucketIndex::grow() {
    std::vector<std::vector<Slot>> old = std::move(buckets_);
    buckets_.assign(old.size() * 4, {});
    for (auto& bucket : old) {
        for (const Slot& slot : bucket) buckets_[bucket_of(slot.id)].push_back(slot);
    }
}

BigImage::BigImage(std::uint64_t threshold)
    : threshold_(threshold), data_(std::make_unique<MemoryByteStore>()) {}

BigImage::BigImage(std::unique_ptr<ByteStore> data, std::uint64_t threshold)
    : threshold_(threshold), data_(std::move(data)) {
    if (!data_) throw Error(ErrorCode::InvalidArgument, "null byte store");
    if (data_->size() != 0) throw Error(ErrorCode::InvalidArgument, "byte store is not empty");
}

BigImage BigImage::from_parts(std::vector<IndexEntry> entries, std::unique_ptr<ByteStore> data,
                              std::uint64_t threshold) {
    if (!data) throw Error(ErrorCode::InvalidArgument, "null byte store");
    BigImage store(threshold);
    store.data_ = std::move(data);
    std::uint64_t expected = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const IndexEntry& e = entries[i];
        const std::string where = "entry " + std::to_string(i) + " (" + e.filename + ")";
        if (e.start_offset != expected) {
            throw Error(ErrorCode::IndexDataMismatch, where + " starts at " + std::to_string(e.start_offset) +
                                                          ", offset chain expects " + std::to_string(expected));
        }
        if (e.record_length < kMinRecordBytes) {
            throw Error(ErrorCode::IndexDataMismatch, where + " record_length below minimum record size");
        }
        if (e.id != filename_id(e.filename)) {
            throw Error(ErrorCode::IndexDataMismatch, where + " id does not match filename hash");
        }
        try {
            validate_filename(e.filename);
        } catch (const Error& err) {
            throw Error(ErrorCode::IndexDataMismatch, where + " " + err.what());
        }
        if (store.index_.find(e.id, e.filename, entries)) {
            throw Error(ErrorCode::DuplicateFilename, where + " repeats a filename");
        }
        if (e.record_length > std::numeric_limits<std::uint64_t>::max() - expected) {
            throw Error(ErrorCode::IndexDataMismatch, where + " overflows the data size");
        }
        expected += e.record_length;
        store.index_.insert(e.id, i);
    }
    if (expected != store.data_->size()) {
        throw Error(ErrorCode::IndexDataMismatch, "index covers " + std::to_string(expected) +
                                                      " bytes, data holds " + std::to_string(store.data_->size()));
    }
    store.entries_ = std::move(entries);
    store.data_size_ = expected;
    return store;
}

std::vector<std::uint8_t> encode_index(const std::vector<IndexEntry>& entries) {
    std::vector<std::uint8_t> out;
    detail::put_bytes(out, "BIGX");
    out.push_back(kIndexVersion);
    detail::put_le(out, static_cast<std::uint64_t>(entries.size()));
    for (const IndexEntry& e : entries) {
        detail::put_le(out, e.id);
        detail::put_le(out, e.start_offset);
        detail::put_le(out, e.record_length);
        detail::put_le(out, static_cast<std::uint16_t>(e.filename.size()));
        detail::put_bytes(out, e.filename);
    }
    return out;
}

std::vector<IndexEntry> decode_index(std::span<const std::uint8_t> bytes) {
    detail::ByteReader in(bytes, ErrorCode::TruncatedInput);
    if (in.take_string(4) != "BIGX") throw Error(ErrorCode::BadMagic, "index does not start with BIGX");
    if (auto v = in.le<std::uint8_t>(); v != kIndexVersion) {
        throw Error(ErrorCode::BadVersion, "index version " + std::to_string(v));
    }
    const auto count = in.le<std::uint64_t>();
    // Smallest entry: three u64, a u16 and a one-byte name.
    constexpr std::size_t kMinEntryBytes = 3 * 8 + 2 + 1;
    if (count > in.remaining() / kMinEntryBytes) {
        throw Error(ErrorCode::TruncatedInput, "index claims " + std::to_string(count) + " entries");
    }
    std::vector<IndexEntry> entries;
    entries.reserve(static_cast<std::size_t>(count));
    for (std::uint64_t i = 0; i < count; ++i) {
        IndexEntry e;
        e.id = in.le<std::uint64_t>();
        e.start_offset = in.le<std::uint64_t>();
        e.record_length = in.le<std::uint64_t>();
        e.filename.assign(in.take_string(in.le<std::uint16_t>()));
        entries.push_back(std::move(e));
    }
    if (in.remaining() != 0) {
        throw Error(ErrorCode::IndexDataMismatch, std::to_string(in.remaining()) + " trailing bytes in index");
    }
    return entries;
}

BigImage BigImage::load(const fs::path& data_path, const fs::path& index_path, std::uint64_t threshold) {
    auto entries = decode_index(io::read_file(index_path));
    auto data = std::make_unique<FileByteStore>(data_path, FileByteStore::Mode::ReadOnly);
    return from_parts(std::move(entries), std::move(data), threshold);
}

void BigImage::save(const fs::path& data_path, const fs::path& index_path) const {
    auto backing = data_->file_path();
    std::error_code ec;
    const bool same_file = backing && fs::exists(data_path) && fs::equivalent(*backing, data_path, ec);
    if (same_file) {
        data_->flush();
    } else {
        FileByteStore out(data_path, FileByteStore::Mode::Truncate);
        std::vector<std::uint8_t> chunk(1 << 20);
        for (std::uint64_t off = 0; off < data_size_;) {
            const std::size_t want = static_cast<std::size_t>(std::min<std::uint64_t>(chunk.size(), data_size_ - off));
            const std::size_t got = data_->read_at(off, std::span(chunk).first(want));
            if (got != want) throw Error(ErrorCode::CorruptRecord, "data store shorter than its index");
            out.append(std::span(chunk).first(got));
            off += got;
        }
        out.flush();
    }
    const auto tmp = fs::path(index_path).concat(".tmp");
    io::write_file(tmp, encode_index(entries_));
    fs::rename(tmp, index_path);
}

const IndexEntry& BigImage::append(const PImage& img) {
    const std::uint64_t length = record_size(img);
    if (find(img.filename)) throw Error(ErrorCode::DuplicateFilename, img.filename);
    if (length > threshold_ || data_size_ > threshold_ - length) {
        throw Error(ErrorCode::ThresholdExceeded, "record of " + std::to_string(length) + " bytes does not fit under " +
                                                      std::to_string(threshold_) + " (holding " +
                                                      std::to_string(data_size_) + ")");
    }
    return append_record(img.filename, encode_record(img));
}

const IndexEntry& BigImage::append_record(std::string filename, std::span<const std::uint8_t> record) {
    validate_filename(filename);
    if (find(filename)) throw Error(ErrorCode::DuplicateFilename, filename);
    if (record.size() > threshold_ || data_size_ > threshold_ - record.size()) {
        throw Error(ErrorCode::ThresholdExceeded, "record of " + std::to_string(record.size()) +
                                                      " bytes does not fit under " + std::to_string(threshold_));
    }
    if (peek_record_size(record) != record.size()) {
        throw Error(ErrorCode::BadRecord, "record length disagrees with its header");
    }
    data_->append(record);
    IndexEntry e;
    e.id = filename_id(filename);
    e.start_offset = data_size_;
    e.record_length = record.size();
    e.filename = std::move(filename);
    entries_.push_back(std::move(e));
    index_.insert(entries_.back().id, entries_.size() - 1);
    data_size_ += record.size();
    return entries_.back();
}

const IndexEntry* BigImage::find(std::string_view name) const {
    auto pos = index_.find(filename_id(name), name, entries_);
    return pos ? &entries_[*pos] : nullptr;
}

PImage BigImage::lookup(std::string_view name) const {
    const IndexEntry* e = find(name);
    if (!e) throw Error(ErrorCode::NotFound, std::string(name));
    return read(*e);
}

std::vector<std::uint8_t> BigImage::read_raw(const IndexEntry& entry) const {
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(entry.record_length));
    const std::size_t got = data_->read_at(entry.start_offset, bytes);
    if (got != bytes.size()) {
        throw Error(ErrorCode::CorruptRecord, entry.filename + " at offset " + std::to_string(entry.start_offset) +
                                                  ": data ends after " + std::to_string(got) + " of " +
                                                  std::to_string(bytes.size()) + " bytes");
    }
    return bytes;
}

namespace {

PImage decode_entry(const IndexEntry& entry, std::span<const std::uint8_t> bytes) {
    try {
        if (peek_record_size(bytes) != bytes.size()) {
            throw Error(ErrorCode::BadRecord, "record size disagrees with index length");
        }
        PImage img = decode_record(bytes);
        if (img.filename != entry.filename) {
            throw Error(ErrorCode::BadRecord, "record holds filename " + img.filename);
        }
        return img;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptRecord) throw;
        throw Error(ErrorCode::CorruptRecord,
                    entry.filename + " at offset " + std::to_string(entry.start_offset) + ": " + e.what());
    }
}

}  // namespace

PImage BigImage::read(const IndexEntry& entry) const { return decode_entry(entry, read_raw(entry)); }

void BigImage::for_each(const std::function<void(const IndexEntry&, PImage&&)>& visit) const {
    constexpr std::size_t kChunk = 1 << 20;
    std::vector<std::uint8_t> buffer;
    std::uint64_t buffer_start = 0;  // data offset of buffer[0]
    for (const IndexEntry& e : entries_) {
        const std::uint64_t end = e.start_offset + e.record_length;
        if (end > buffer_start + buffer.size()) {
            // Keep the unread tail, then refill from where the buffer ends.
            const std::size_t keep = static_cast<std::size_t>(buffer_start + buffer.size() - e.start_offset);
            std::vector<std::uint8_t> next(std::max<std::size_t>(kChunk, static_cast<std::size_t>(e.record_length)));
            std::copy(buffer.end() - static_cast<std::ptrdiff_t>(keep), buffer.end(), next.begin());
            const std::uint64_t fill_from = e.start_offset + keep;
            const std::size_t want = static_cast<std::size_t>(
                std::min<std::uint64_t>(next.size() - keep, data_size_ - fill_from));
            const std::size_t got = data_->read_at(fill_from, std::span(next).subspan(keep, want));
            next.resize(keep + got);
            buffer = std::move(next);
            buffer_start = e.start_offset;
            if (end > buffer_start + buffer.size()) {
                throw Error(ErrorCode::CorruptRecord, e.filename + " at offset " + std::to_string(e.start_offset) +
                                                          ": data ends before the record does");
            }
        }
        auto bytes = std::span<const std::uint8_t>(buffer).subspan(static_cast<std::size_t>(e.start_offset - buffer_start),
                                                                   static_cast<std::size_t>(e.record_length));
        visit(e, decode_entry(e, bytes));
    }
}

std::vector<PImage> BigImage::iterate() const {
    std::vector<PImage> out;
    out.reserve(entries_.size());
    for_each([&](const IndexEntry&, PImage&& img) { out.push_back(std::move(img)); });
    return out;
}

void BigImage::verify() const {
    for_each([](const IndexEntry&, PImage&&) {});
}

std::vector<std::uint8_t> BigImage::data_bytes() const {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(data_->size()));
    out.resize(data_->read_at(0, out));
    return out;
}

StorePaths store_paths(const fs::path& dir, std::string_view name, std::size_t part) {
    std::string stem(name);
    if (part > 0) stem += "." + std::to_string(part);
    return {dir / (stem + ".bigdata"), dir / (stem + ".bigidx")};
}

StorePaths resolve_store(const fs::path& path) {
    fs::path base = path;
    if (base.extension() == ".bigdata" || base.extension() == ".bigidx") base.replace_extension();
    return {fs::path(base).concat(".bigdata"), fs::path(base).concat(".bigidx")};
}

std::size_t PackResult::total_entries() const {
    std::size_t n = 0;
    for (const auto& s : stores) n += s.entries;
    return n;
}

std::uint64_t PackResult::total_bytes() const {
    std::uint64_t n = 0;
    for (const auto& s : stores) n += s.data_bytes;
    return n;
}

namespace {

// Greedy fill: a record that does not fit closes the current store and opens
// the next sibling.
class RolloverPacker {
public:
    RolloverPacker(const fs::path& out_dir, std::string_view name, std::uint64_t threshold)
        : out_dir_(out_dir), name_(name), threshold_(threshold) {}

    void add(const PImage& img, PackResult& result) {
        if (record_size(img) > threshold_) {
            result.errors.push_back({img.filename, "record of " + std::to_string(record_size(img)) +
                                                       " bytes exceeds the store threshold"});
            return;
        }
        if (!current_) open_next();
        try {
            current_->append(img);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ThresholdExceeded) throw;
            close(result);
            open_next();
            current_->append(img);
        }
    }

    void close(PackResult& result) {
        if (!current_) return;
        current_->save(paths_.data, paths_.index);
        result.stores.push_back({paths_, current_->size(), current_->data_size()});
        current_.reset();
    }

private:
    void open_next() {
        paths_ = store_paths(out_dir_, name_, part_++);
        current_.emplace(std::make_unique<FileByteStore>(paths_.data, FileByteStore::Mode::Truncate), threshold_);
    }

    fs::path out_dir_;
    std::string name_;
    std::uint64_t threshold_;
    std::size_t part_ = 0;
    StorePaths paths_;
    std::optional<BigImage> current_;
};

}  // namespace

PackResult pack_directory(const fs::path& dir, const fs::path& out_dir, std::string_view name,
                          std::uint64_t threshold) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

    PackResult result;
    RolloverPacker packer(out_dir, name, threshold);
    for (const auto& file : files) {
        PImage img;
        try {
            img = decode_pnm(io::read_file(file), file.filename().string());
        } catch (const Error& e) {
            result.errors.push_back({file.filename().string(), e.what()});
            continue;
        }
        packer.add(img, result);
    }
    packer.close(result);
    return result;
}

PackResult pack_images(const std::vector<PImage>& images, const fs::path& out_dir, std::string_view name,
                       std::uint64_t threshold) {
    PackResult result;
    RolloverPacker packer(out_dir, name, threshold);
    for (const auto& img : images) {
        try {
            packer.add(img, result);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Io) throw;
            result.errors.push_back({img.filename, e.what()});
        }
    }
    packer.close(result);
    return result;
}

}  // namespace icp

#include "icp/engine.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <chrono>
#include <future>

#include "bytes.hpp"
#include "icp/error.hpp"
#include "icp/worker_pool.hpp"

namespace icp {

PartitionPlan partition(const BigImage& store, std::uint64_t blocksize) {
    if (blocksize == 0) throw Error(ErrorCode::InvalidArgument, "blocksize must be at least 1");
    if (store.empty()) throw Error(ErrorCode::EmptyStore, "cannot partition an empty store");

    PartitionPlan plan;
    plan.blocksize = blocksize;
    plan.num_map_task = store.data_size() / blocksize + 1;

    const auto& entries = store.entries();
    std::size_t i = 0;
    std::uint64_t offset = 0;
    for (std::uint64_t count = 1; count <= plan.num_map_task && i < entries.size(); ++count) {
        // blocksize * count never overflows: count <= data_size / blocksize + 1.
        const std::uint64_t boundary = blocksize * count;
        Group group;
        while (i < entries.size() && offset < boundary) {
            group.members.push_back(entries[i]);
            offset += entries[i].record_length;
            ++i;
        }
        if (!group.members.empty()) {
            group.k = plan.groups.size() + 1;
            plan.groups.push_back(std::move(group));
        }
    }
    return plan;
}

FeatureSet map_group(const Group& group, const BigImage& store, Algorithm algorithm) {
    FeatureSet set;
    set.k = group.k;
    set.per_image.reserve(group.members.size());
    for (const IndexEntry& entry : group.members) {
        set.per_image.push_back(extract_features(algorithm, store.read(entry)));
    }
    return set;
}

ReduceSpec ReduceSpec::all_groups(std::size_t groups) {
    return ReduceSpec{ReduceMode::AllGroups, std::vector<std::uint8_t>(groups, 1)};
}

ReduceSpec ReduceSpec::single_group(std::size_t k, std::size_t groups) {
    if (k < 1 || k > groups) {
        throw Error(ErrorCode::InvalidArgument,
                    "group " + std::to_string(k) + " outside 1.." + std::to_string(groups));
    }
    ReduceSpec spec{ReduceMode::SingleGroup, std::vector<std::uint8_t>(groups, 0)};
    spec.alpha[k - 1] = 1;
    return spec;
}

ReduceSpec ReduceSpec::custom(std::vector<std::uint8_t> alpha) {
    for (auto a : alpha) {
        if (a > 1) throw Error(ErrorCode::InvalidArgument, "alpha coefficients must be 0 or 1");
    }
    return ReduceSpec{ReduceMode::Custom, std::move(alpha)};
}

ReduceOutput reduce(std::span<const FeatureSet> sets, const ReduceSpec& spec) {
    if (spec.alpha.size() != sets.size()) {
        throw Error(ErrorCode::AlphaLengthMismatch, std::to_string(spec.alpha.size()) + " coefficients for " +
                                                        std::to_string(sets.size()) + " groups");
    }
    std::vector<const FeatureSet*> ordered;
    ordered.reserve(sets.size());
    for (const auto& s : sets) ordered.push_back(&s);
    std::stable_sort(ordered.begin(), ordered.end(), [](const FeatureSet* a, const FeatureSet* b) { return a->k < b->k; });

    ReduceOutput out;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        // alpha[i] belongs to the i-th group in ascending k.
        if (spec.alpha[i] != 1) continue;
        out.records.insert(out.records.end(), ordered[i]->per_image.begin(), ordered[i]->per_image.end());
    }
    return out;
}

AlphaSelection AlphaSelection::parse(std::string_view text) {
    AlphaSelection sel;
    if (text == "all") return sel;
    auto parse_uint = [&](std::string_view s) {
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
            throw Error(ErrorCode::InvalidArgument, "bad alpha mode '" + std::string(text) + "'");
        }
        return v;
    };
    if (text.starts_with("single:")) {
        sel.mode = ReduceMode::SingleGroup;
        sel.k = parse_uint(text.substr(7));
        return sel;
    }
    if (text.starts_with("custom:")) {
        sel.mode = ReduceMode::Custom;
        std::string_view rest = text.substr(7);
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const auto v = parse_uint(rest.substr(0, comma));
            if (v > 1) throw Error(ErrorCode::InvalidArgument, "alpha coefficients must be 0 or 1");
            sel.alpha.push_back(static_cast<std::uint8_t>(v));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        return sel;
    }
    throw Error(ErrorCode::InvalidArgument, "bad alpha mode '" + std::string(text) + "' (all | single:<k> | custom:<a,..>)");
}

ReduceSpec AlphaSelection::resolve(std::size_t groups) const {
    switch (mode) {
        case ReduceMode::AllGroups: return ReduceSpec::all_groups(groups);
        case ReduceMode::SingleGroup: return ReduceSpec::single_group(k, groups);
        case ReduceMode::Custom: return ReduceSpec::custom(alpha);
    }
    return ReduceSpec::all_groups(groups);
}

JobResult run_job(const BigImage& store, std::uint64_t blocksize, Algorithm algorithm,
                  const AlphaSelection& selection, std::size_t workers) {
    if (workers == 0) throw Error(ErrorCode::InvalidArgument, "workers must be at least 1");
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();

    const PartitionPlan plan = partition(store, blocksize);
    const ReduceSpec spec = selection.resolve(plan.groups.size());

    std::vector<FeatureSet> sets(plan.groups.size());
    std::vector<double> seconds(plan.groups.size(), 0.0);
    {
        WorkerPool pool(std::min(workers, plan.groups.size()));
        std::vector<std::future<void>> pending;
        pending.reserve(plan.groups.size());
        for (std::size_t g = 0; g < plan.groups.size(); ++g) {
            pending.push_back(pool.submit([&, g] {
                const auto t0 = clock::now();
                sets[g] = map_group(plan.groups[g], store, algorithm);
                seconds[g] = std::chrono::duration<double>(clock::now() - t0).count();
            }));
        }
        for (auto& f : pending) f.wait();
        for (auto& f : pending) f.get();
    }

    JobResult result;
    result.output = reduce(sets, spec);
    result.stats.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
    result.stats.group_seconds = std::move(seconds);
    result.stats.images = store.size();
    result.stats.groups = plan.groups.size();
    result.stats.num_map_task = plan.num_map_task;
    result.stats.workers = workers;
    for (const auto& r : result.output.records) result.stats.keypoints += r.keypoints.size();
    return result;
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

namespace {

void append_float(std::string& out, float v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
}

void append_rows(std::string& out, const ImageFeatures& f) {
    const std::string name = csv_escape(f.filename);
    for (std::size_t i = 0; i < f.keypoints.size(); ++i) {
        const Keypoint& kp = f.keypoints[i];
        out += name;
        out += ',';
        out += std::to_string(i);
        for (float v : {kp.x, kp.y, kp.scale, kp.orientation, kp.response}) {
            out += ',';
            append_float(out, v);
        }
        out += '\n';
    }
}

constexpr std::string_view kCsvHeader = "filename,keypoint_index,x,y,scale,orientation,response\n";

void append_descriptors(std::vector<std::uint8_t>& out, const ImageFeatures& f) {
    for (float v : f.descriptors.values) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        detail::put_le(out, bits);
    }
}

}  // namespace

std::string features_csv(const ReduceOutput& output) {
    std::string out(kCsvHeader);
    for (const auto& r : output.records) append_rows(out, r);
    return out;
}

std::string features_csv(const ImageFeatures& features) {
    std::string out(kCsvHeader);
    append_rows(out, features);
    return out;
}

std::vector<std::uint8_t> descriptor_bytes(const ReduceOutput& output) {
    std::vector<std::uint8_t> out;
    for (const auto& r : output.records) append_descriptors(out, r);
    return out;
}

std::vector<std::uint8_t> descriptor_bytes(const ImageFeatures& features) {
    std::vector<std::uint8_t> out;
    append_descriptors(out, features);
    return out;
}

void write_output(const ReduceOutput& output, const std::filesystem::path& csv_path,
                  const std::filesystem::path& descriptor_path) {
    const std::string csv = features_csv(output);
    io::write_file(csv_path, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
    io::write_file(descriptor_path, descriptor_bytes(output));
}

std::uint64_t output_digest(const ReduceOutput& output) {
    const std::string csv = features_csv(output);
    const auto desc = descriptor_bytes(output);
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&](std::uint8_t c) {
        h ^= c;
        h *= 0x100000001b3ull;
    };
    for (char c : csv) mix(static_cast<std::uint8_t>(c));
    for (auto c : desc) mix(c);
    return h;
}

}  // namespace icp

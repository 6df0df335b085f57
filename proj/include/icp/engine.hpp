#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "icp/bigimage.hpp"
#include "icp/features.hpp"

namespace icp {

struct Group {
    std::size_t k = 0;  // 1-based
    std::vector<IndexEntry> members;
};

struct PartitionPlan {
    std::uint64_t blocksize = 0;
    // data_size / blocksize + 1, including trailing groups left empty.
    std::uint64_t num_map_task = 0;
    std::vector<Group> groups;  // non-empty groups only
};

// Walks the entries in order and closes group `count` once the running
// offset reaches blocksize * count. A record straddling a boundary stays in
// the group that reached it, so a group may overshoot by one record.
PartitionPlan partition(const BigImage& store, std::uint64_t blocksize);

struct FeatureSet {
    std::size_t k = 0;
    std::vector<ImageFeatures> per_image;  // member order
};

FeatureSet map_group(const Group& group, const BigImage& store, Algorithm algorithm);

enum class ReduceMode { AllGroups, SingleGroup, Custom };

struct ReduceSpec {
    ReduceMode mode = ReduceMode::AllGroups;
    std::vector<std::uint8_t> alpha;  // one 0/1 coefficient per group

    static ReduceSpec all_groups(std::size_t groups);
    static ReduceSpec single_group(std::size_t k, std::size_t groups);
    static ReduceSpec custom(std::vector<std::uint8_t> alpha);
};

struct ReduceOutput {
    std::vector<ImageFeatures> records;  // ascending k, then member order

    bool operator==(const ReduceOutput&) const = default;
};

// Keeps exactly the records of groups whose coefficient is 1.
ReduceOutput reduce(std::span<const FeatureSet> sets, const ReduceSpec& spec);

// Group selection known before the partition exists: "all", "single:<k>" or
// "custom:<a1,a2,...>".
struct AlphaSelection {
    ReduceMode mode = ReduceMode::AllGroups;
    std::size_t k = 0;
    std::vector<std::uint8_t> alpha;

    static AlphaSelection parse(std::string_view text);
    ReduceSpec resolve(std::size_t groups) const;
};

struct JobStats {
    double wall_seconds = 0;
    std::vector<double> group_seconds;  // indexed by k - 1
    std::size_t images = 0;
    std::size_t groups = 0;
    std::uint64_t num_map_task = 0;
    std::size_t workers = 0;
    std::size_t keypoints = 0;
};

struct JobResult {
    ReduceOutput output;
    JobStats stats;
};

// Partition, map every group on at most `workers` concurrent tasks, reduce.
// The output does not depend on the worker count.
JobResult run_job(const BigImage& store, std::uint64_t blocksize, Algorithm algorithm,
                  const AlphaSelection& selection, std::size_t workers);

// filename,keypoint_index,x,y,scale,orientation,response
std::string features_csv(const ReduceOutput& output);
std::string features_csv(const ImageFeatures& features);
// Little-endian f32 rows, one per keypoint that carries a descriptor, in CSV
// record order.
std::vector<std::uint8_t> descriptor_bytes(const ReduceOutput& output);
std::vector<std::uint8_t> descriptor_bytes(const ImageFeatures& features);

void write_output(const ReduceOutput& output, const std::filesystem::path& csv_path,
                  const std::filesystem::path& descriptor_path);

// FNV-1a over the CSV text followed by the descriptor bytes.
std::uint64_t output_digest(const ReduceOutput& output);

std::string csv_escape(std::string_view field);

}  // namespace icp

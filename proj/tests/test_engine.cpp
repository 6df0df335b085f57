#include <doctest.h>

#include <map>
#include <numeric>
#include <random>

#include "icp/engine.hpp"
#include "icp/error.hpp"
#include "icp/synth.hpp"
#include "icp/worker_pool.hpp"
#include "support.hpp"

using namespace icp;

namespace {

// Twenty-byte records: one-character name and a 1x3 grey matrix.
BigImage tiny_store(int n) {
    BigImage store;
    for (int i = 0; i < n; ++i) {
        store.append(PImage{std::string(1, static_cast<char>('a' + i)), PixelMatrix{3, 1, ColorMode::Grey, {1, 2, 3}}});
    }
    return store;
}

std::vector<std::size_t> group_sizes(const PartitionPlan& plan) {
    std::vector<std::size_t> out;
    for (const auto& g : plan.groups) out.push_back(g.members.size());
    return out;
}

BigImage texture_store(std::size_t n, std::uint32_t side, std::uint64_t seed) {
    BigImage store;
    for (auto& img : synth::texture_dataset(n, side, side, seed)) store.append(img);
    return store;
}

}  // namespace

TEST_CASE("partition follows the worked examples") {
    const BigImage store = tiny_store(10);  // 200 bytes
    REQUIRE(store.data_size() == 200);

    const auto plan = partition(store, 80);
    CHECK(plan.num_map_task == 3);
    CHECK(group_sizes(plan) == std::vector<std::size_t>{4, 4, 2});

    const auto even = partition(store, 100);
    CHECK(even.num_map_task == 3);
    CHECK(group_sizes(even) == std::vector<std::size_t>{5, 5});

    const auto whole = partition(store, 200);
    CHECK(whole.num_map_task == 2);
    CHECK(group_sizes(whole) == std::vector<std::size_t>{10});

    const auto one_byte = partition(store, 1);
    CHECK(one_byte.num_map_task == 201);
    CHECK(one_byte.groups.size() == 10);
    for (std::size_t k = 0; k < one_byte.groups.size(); ++k) CHECK(one_byte.groups[k].k == k + 1);
}

TEST_CASE("a straddling record stays with the group that reached it") {
    const BigImage store = tiny_store(3);  // offsets 0, 20, 40
    const auto plan = partition(store, 30);
    // Group 1 takes a (0 < 30) and b (20 < 30); c starts at 40 < 60.
    CHECK(group_sizes(plan) == std::vector<std::size_t>{2, 1});
}

TEST_CASE("partition rejects bad input") {
    REQUIRE_ERROR_CODE(partition(tiny_store(2), 0), ErrorCode::InvalidArgument);
    REQUIRE_ERROR_CODE(partition(BigImage{}, 10), ErrorCode::EmptyStore);
}

TEST_CASE("partition agrees with a loop simulator on varied record sizes") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 60; ++trial) {
        BigImage store;
        const int n = 1 + static_cast<int>(rng() % 40);
        for (int i = 0; i < n; ++i) {
            const auto w = static_cast<std::uint32_t>(1 + rng() % 50);
            store.append(PImage{"f" + std::to_string(i), PixelMatrix{w, 1, ColorMode::Grey, std::vector<std::uint8_t>(w)}});
        }
        const std::uint64_t blocksize = 1 + rng() % (store.data_size() + 50);

        // Simulator: advance count until the running offset is below the
        // boundary, then place the record.
        std::map<std::uint64_t, std::vector<std::string>> buckets;
        std::uint64_t count = 1, offset = 0;
        for (const auto& e : store.entries()) {
            while (!(offset < blocksize * count)) ++count;
            buckets[count].push_back(e.filename);
            offset += e.record_length;
        }
        const auto plan = partition(store, blocksize);
        CHECK(plan.num_map_task == store.data_size() / blocksize + 1);
        REQUIRE(plan.groups.size() == buckets.size());
        CHECK(plan.groups.size() <= plan.num_map_task);
        std::size_t g = 0;
        for (const auto& [c, names] : buckets) {
            CHECK(plan.groups[g].k == g + 1);
            std::vector<std::string> got;
            for (const auto& m : plan.groups[g].members) got.push_back(m.filename);
            CHECK(got == names);
            ++g;
        }
    }
}

TEST_CASE("reduce selects groups by coefficient") {
    std::vector<FeatureSet> sets(3);
    for (std::size_t i = 0; i < 3; ++i) {
        sets[i].k = 3 - i;  // deliberately out of order
        sets[i].per_image.push_back(ImageFeatures{"g" + std::to_string(3 - i), {}, {}});
    }
    auto names = [](const ReduceOutput& out) {
        std::vector<std::string> v;
        for (const auto& r : out.records) v.push_back(r.filename);
        return v;
    };
    CHECK(names(reduce(sets, ReduceSpec::all_groups(3))) == std::vector<std::string>{"g1", "g2", "g3"});
    CHECK(names(reduce(sets, ReduceSpec::single_group(2, 3))) == std::vector<std::string>{"g2"});
    CHECK(names(reduce(sets, ReduceSpec::custom({1, 0, 1}))) == std::vector<std::string>{"g1", "g3"});
    CHECK(reduce(sets, ReduceSpec::custom({0, 0, 0})).records.empty());
    REQUIRE_ERROR_CODE(reduce(sets, ReduceSpec::custom({1, 1})), ErrorCode::AlphaLengthMismatch);
    REQUIRE_ERROR_CODE(ReduceSpec::single_group(4, 3), ErrorCode::InvalidArgument);
    REQUIRE_ERROR_CODE(ReduceSpec::single_group(0, 3), ErrorCode::InvalidArgument);
    REQUIRE_ERROR_CODE(ReduceSpec::custom({2}), ErrorCode::InvalidArgument);
}

TEST_CASE("alpha selection syntax") {
    CHECK(AlphaSelection::parse("all").mode == ReduceMode::AllGroups);
    const auto s = AlphaSelection::parse("single:2");
    CHECK(s.mode == ReduceMode::SingleGroup);
    CHECK(s.k == 2);
    const auto c = AlphaSelection::parse("custom:1,0,1");
    CHECK(c.alpha == std::vector<std::uint8_t>{1, 0, 1});
    CHECK(c.resolve(3).alpha == c.alpha);
    REQUIRE_ERROR_CODE(reduce(std::vector<FeatureSet>(4), c.resolve(4)), ErrorCode::AlphaLengthMismatch);
    for (const char* bad : {"", "every", "single:", "single:x", "custom:1,,0", "custom:2", "single:-1"}) {
        REQUIRE_ERROR_CODE(AlphaSelection::parse(bad), ErrorCode::InvalidArgument);
    }
}

TEST_CASE("run_job output does not depend on workers") {
    const BigImage store = texture_store(24, 40, 5);
    const std::uint64_t bs = store.data_size() / 7;
    for (const Algorithm alg : {Algorithm::Harris, Algorithm::Sift}) {
        const auto base = run_job(store, bs, alg, AlphaSelection{}, 1);
        CHECK(base.output.records.size() == 24);
        CHECK(base.stats.groups >= 7);
        CHECK(base.stats.keypoints > 0);
        for (std::size_t w : {2u, 3u, 8u}) {
            const auto other = run_job(store, bs, alg, AlphaSelection{}, w);
            CHECK(other.output == base.output);
            CHECK(output_digest(other.output) == output_digest(base.output));
        }
    }
}

TEST_CASE("single-group selection covers exactly that group's members") {
    const BigImage store = texture_store(9, 24, 8);
    const auto plan = partition(store, store.data_size() / 3 + 1);
    REQUIRE(plan.groups.size() == 3);
    const auto job = run_job(store, plan.blocksize, Algorithm::Harris, AlphaSelection::parse("single:2"), 2);
    REQUIRE(job.output.records.size() == plan.groups[1].members.size());
    for (std::size_t i = 0; i < job.output.records.size(); ++i) {
        CHECK(job.output.records[i].filename == plan.groups[1].members[i].filename);
    }
}

TEST_CASE("map failures propagate out of run_job") {
    BigImage store;
    store.append(PImage{"small", PixelMatrix{4, 4, ColorMode::Grey, std::vector<std::uint8_t>(16)}});
    REQUIRE_ERROR_CODE(run_job(store, 64, Algorithm::Harris, AlphaSelection{}, 2), ErrorCode::ImageTooSmall);
    REQUIRE_ERROR_CODE(run_job(texture_store(2, 16, 1), 64, Algorithm::Harris, AlphaSelection{}, 0),
                       ErrorCode::InvalidArgument);
}

TEST_CASE("feature CSV layout and escaping") {
    ReduceOutput out;
    ImageFeatures f;
    f.filename = "a,\"b\".pgm";
    f.keypoints = {{1.5f, 2.25f, 1.0f, 0.0f, 100.0f}, {3, 4, 1.6f, 0.5f, 0.125f}};
    f.descriptors.values.assign(256, 0.25f);
    out.records.push_back(f);
    const std::string csv = features_csv(out);
    CHECK(csv ==
          "filename,keypoint_index,x,y,scale,orientation,response\n"
          "\"a,\"\"b\"\".pgm\",0,1.5,2.25,1,0,100\n"
          "\"a,\"\"b\"\".pgm\",1,3,4,1.6,0.5,0.125\n");
    const auto desc = descriptor_bytes(out);
    REQUIRE(desc.size() == 256 * 4);
    // 0.25f == 0x3e800000, little-endian.
    CHECK(desc[0] == 0x00);
    CHECK(desc[2] == 0x80);
    CHECK(desc[3] == 0x3e);
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("line\nbreak") == "\"line\nbreak\"");
}

TEST_CASE("worker pool runs FIFO on one thread and drains on destruction") {
    std::vector<int> order;
    std::future<int> last;
    {
        WorkerPool pool(1);
        for (int i = 0; i < 20; ++i) {
            last = pool.submit([&order, i] {
                order.push_back(i);
                return i;
            });
        }
    }
    CHECK(last.get() == 19);
    std::vector<int> expected(20);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(order == expected);

    WorkerPool pool(2);
    auto failing = pool.submit([]() -> int { throw Error(ErrorCode::InvalidArgument, "boom"); });
    REQUIRE_ERROR_CODE(failing.get(), ErrorCode::InvalidArgument);
}

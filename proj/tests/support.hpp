#pragma once

#include <filesystem>
#include <random>
#include <string>

namespace icp::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("icp-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Hand-rolled FNV-1a 64, kept independent of the library.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace icp::test

#define REQUIRE_ERROR_CODE(expr, expected_code)                 \
    do {                                                        \
        bool thrown_ = false;                                   \
        try {                                                   \
            (void)(expr);                                       \
        } catch (const ::icp::Error& e_) {                      \
            thrown_ = true;                                     \
            CHECK_MESSAGE(e_.code() == (expected_code), e_.what()); \
        }                                                       \
        CHECK_MESSAGE(thrown_, "no icp::Error from " #expr);    \
    } while (0)

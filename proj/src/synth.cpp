#include "icp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "icp/byte_store.hpp"
#include "icp/error.hpp"

namespace icp::synth {

namespace {

// splitmix64: a stateless hash of (seed, lattice point), identical on every
// platform.
std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double lattice(std::uint64_t seed, int octave, std::int64_t x, std::int64_t y) {
    std::uint64_t h = mix(seed ^ mix(static_cast<std::uint64_t>(octave) * 0x100000001b3ull));
    h = mix(h ^ static_cast<std::uint64_t>(x));
    h = mix(h ^ static_cast<std::uint64_t>(y));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3 - 2 * t); }

}  // namespace

PixelMatrix value_noise(std::uint32_t width, std::uint32_t height, std::uint64_t seed, NoiseParams params) {
    if (width == 0 || height == 0) throw Error(ErrorCode::InvalidArgument, "noise image needs nonzero size");
    if (params.cell == 0 || params.octaves < 1) throw Error(ErrorCode::InvalidArgument, "bad noise parameters");

    std::vector<double> field(std::size_t{width} * height, 0.0);
    double amplitude = 1.0;
    double cell = params.cell;
    for (int o = 0; o < params.octaves; ++o) {
        for (std::uint32_t y = 0; y < height; ++y) {
            const double fy = y / cell;
            const auto y0 = static_cast<std::int64_t>(std::floor(fy));
            const double ty = smooth(fy - y0);
            for (std::uint32_t x = 0; x < width; ++x) {
                const double fx = x / cell;
                const auto x0 = static_cast<std::int64_t>(std::floor(fx));
                const double tx = smooth(fx - x0);
                const double a = lattice(seed, o, x0, y0), b = lattice(seed, o, x0 + 1, y0);
                const double c = lattice(seed, o, x0, y0 + 1), d = lattice(seed, o, x0 + 1, y0 + 1);
                const double top = a + (b - a) * tx;
                const double bottom = c + (d - c) * tx;
                field[std::size_t{y} * width + x] += amplitude * (top + (bottom - top) * ty);
            }
        }
        amplitude *= 0.5;
        cell = std::max(1.0, cell / 2);
    }

    const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
    const double span = *hi - *lo;
    PixelMatrix m{width, height, ColorMode::Grey, std::vector<std::uint8_t>(field.size())};
    for (std::size_t i = 0; i < field.size(); ++i) {
        const double v = span > 0 ? (field[i] - *lo) / span : 0.5;
        auto s = static_cast<std::uint8_t>(std::lround(v * 255.0));
        if (params.even_only) s &= 0xFE;
        m.data[i] = s;
    }
    return m;
}

PixelMatrix white_square(std::uint32_t width, std::uint32_t height, std::uint32_t x0, std::uint32_t y0,
                         std::uint32_t side) {
    if (width == 0 || height == 0) throw Error(ErrorCode::InvalidArgument, "canvas needs nonzero size");
    if (x0 + side > width || y0 + side > height) throw Error(ErrorCode::InvalidArgument, "square leaves the canvas");
    PixelMatrix m{width, height, ColorMode::Grey, std::vector<std::uint8_t>(std::size_t{width} * height, 0)};
    for (std::uint32_t y = y0; y < y0 + side; ++y) {
        std::fill_n(m.data.begin() + static_cast<std::ptrdiff_t>(std::size_t{y} * width + x0), side, 255);
    }
    return m;
}

PixelMatrix rotate90(const PixelMatrix& in) {
    const std::size_t ch = channels(in.mode);
    PixelMatrix out{in.height, in.width, in.mode, std::vector<std::uint8_t>(in.data.size())};
    for (std::uint32_t y = 0; y < in.height; ++y) {
        for (std::uint32_t x = 0; x < in.width; ++x) {
            const std::size_t nx = y, ny = in.width - 1 - x;
            for (std::size_t c = 0; c < ch; ++c) {
                out.data[(ny * out.width + nx) * ch + c] = in.data[(std::size_t{y} * in.width + x) * ch + c];
            }
        }
    }
    return out;
}

PImage random_pimage(std::mt19937_64& rng, std::string filename, std::uint32_t max_side) {
    if (max_side == 0) throw Error(ErrorCode::InvalidArgument, "max_side must be positive");
    const auto w = static_cast<std::uint32_t>(rng() % max_side + 1);
    const auto h = static_cast<std::uint32_t>(rng() % max_side + 1);
    const ColorMode mode = rng() & 1 ? ColorMode::RGB : ColorMode::Grey;
    PixelMatrix m{w, h, mode, std::vector<std::uint8_t>(std::size_t{w} * h * channels(mode))};
    for (std::size_t i = 0; i < m.data.size(); i += 8) {
        std::uint64_t bits = rng();
        for (std::size_t j = i; j < std::min(i + 8, m.data.size()); ++j, bits >>= 8) {
            m.data[j] = static_cast<std::uint8_t>(bits);
        }
    }
    return PImage{std::move(filename), std::move(m)};
}

std::string dataset_name(std::string_view prefix, std::size_t index, std::string_view ext) {
    char digits[32];
    std::snprintf(digits, sizeof digits, "%06zu", index);
    return std::string(prefix) + "_" + digits + "." + std::string(ext);
}

std::vector<PImage> texture_dataset(std::size_t n, std::uint32_t width, std::uint32_t height, std::uint64_t seed,
                                    std::string_view prefix) {
    std::vector<PImage> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(PImage{dataset_name(prefix, i), value_noise(width, height, seed + i)});
    }
    return out;
}

std::vector<std::filesystem::path> write_pgm_directory(const std::filesystem::path& dir, std::size_t n,
                                                       std::uint32_t width, std::uint32_t height,
                                                       std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> paths;
    paths.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto path = dir / dataset_name("img", i);
        io::write_file(path, encode_pnm(value_noise(width, height, seed + i)));
        paths.push_back(std::move(path));
    }
    return paths;
}

}  // namespace icp::synth

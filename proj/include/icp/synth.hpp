#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "icp/pimage.hpp"

namespace icp::synth {

struct NoiseParams {
    std::uint32_t cell = 16;  // lattice spacing of the coarsest octave, in pixels
    int octaves = 3;
    bool even_only = false;  // clear the low bit of every sample
};

// Seeded multi-octave value noise, stretched to the full 0..255 range.
PixelMatrix value_noise(std::uint32_t width, std::uint32_t height, std::uint64_t seed, NoiseParams params = {});

// Black canvas with a white axis-aligned square whose top-left pixel is
// (x0, y0).
PixelMatrix white_square(std::uint32_t width, std::uint32_t height, std::uint32_t x0, std::uint32_t y0,
                         std::uint32_t side);

// Quarter turn counter-clockwise: the pixel at (x, y) moves to (y, width - 1 - x).
PixelMatrix rotate90(const PixelMatrix& matrix);

// Grey or RGB image with side lengths in [1, max_side] and uniform samples.
PImage random_pimage(std::mt19937_64& rng, std::string filename, std::uint32_t max_side = 128);

// "<prefix>_<index, zero-padded to 6>.<ext>"
std::string dataset_name(std::string_view prefix, std::size_t index, std::string_view ext = "pgm");

// n grey value-noise images with seeds seed, seed + 1, ...
std::vector<PImage> texture_dataset(std::size_t n, std::uint32_t width, std::uint32_t height, std::uint64_t seed,
                                    std::string_view prefix = "img");

// Writes n grey PGMs into dir and returns their paths in order.
std::vector<std::filesystem::path> write_pgm_directory(const std::filesystem::path& dir, std::size_t n,
                                                       std::uint32_t width, std::uint32_t height,
                                                       std::uint64_t seed);

}  // namespace icp::synth

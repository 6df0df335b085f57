#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "icp/pimage.hpp"

namespace icp {

enum class Algorithm { Harris, Sift };

std::string_view to_string(Algorithm algorithm) noexcept;
// Accepts "harris" / "sift" (case-insensitive); throws InvalidArgument.
Algorithm parse_algorithm(std::string_view name);

// Image frame, origin top-left. orientation is radians in [0, 2*pi).
struct Keypoint {
    float x = 0;
    float y = 0;
    float scale = 0;
    float orientation = 0;
    float response = 0;

    bool operator==(const Keypoint&) const = default;
};

// Row-major descriptor matrix: size() rows of dim floats.
struct DescriptorSet {
    std::size_t dim = 128;
    std::vector<float> values;

    std::size_t size() const noexcept { return dim == 0 ? 0 : values.size() / dim; }
    bool empty() const noexcept { return values.empty(); }
    std::span<const float> row(std::size_t i) const { return std::span(values).subspan(i * dim, dim); }

    bool operator==(const DescriptorSet&) const = default;
};

struct HarrisParams {
    double k = 0.04;
    double sigma = 1.0;
    // Fraction of the strongest response a corner must exceed.
    double response_threshold = 0.01;
    int nms_radius = 3;
};

// 3x3 Sobel gradients, Gaussian-weighted structure tensor, R = det - k*trace^2,
// relative threshold and square non-maximum suppression. Peaks are refined to
// subpixel by a separable parabola fit. Sorted by descending response;
// orientation is 0 and scale is sigma.
std::vector<Keypoint> harris(const PixelMatrix& grey, const HarrisParams& params = {});

struct SiftParams {
    int scales_per_octave = 3;
    double sigma = 1.6;
    // Blur already present in the input image.
    double input_sigma = 0.5;
    bool upsample = false;
    // Applied to |DoG| at the refined extremum, intensities in [0, 1].
    double contrast_threshold = 0.03;
    double edge_ratio = 10.0;
    int max_refine_iterations = 5;
    int border = 5;
    int orientation_bins = 36;
    double orientation_peak_ratio = 0.8;
};

struct SiftResult {
    std::vector<Keypoint> keypoints;
    DescriptorSet descriptors;  // one 128-d row per keypoint
};

// Difference-of-Gaussians keypoints with 4x4x8 gradient histogram descriptors.
SiftResult sift_extract(const PixelMatrix& grey, const SiftParams& params = {});

// L2 normalize, clamp components at 0.2, renormalize. Returns false (and
// leaves the values untouched) for an all-zero vector.
bool normalize_descriptor(std::span<float> values, float clamp = 0.2f);

using MatchPair = std::pair<std::size_t, std::size_t>;

// Nearest-neighbour matching with the ratio test; ties go to the lower index.
// When b holds a single descriptor there is no second neighbour and the
// nearest is accepted.
std::vector<MatchPair> match_descriptors(const DescriptorSet& a, const DescriptorSet& b, double ratio = 0.8);

struct ImageFeatures {
    std::string filename;
    std::vector<Keypoint> keypoints;
    DescriptorSet descriptors;  // empty for Harris

    bool operator==(const ImageFeatures&) const = default;
};

// Converts to grey when needed and runs the selected extractor.
ImageFeatures extract_features(Algorithm algorithm, const PImage& img);

}  // namespace icp

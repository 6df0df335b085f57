#include <algorithm>
#include <cctype>
#include <limits>
#include <string>

#include "icp/error.hpp"
#include "icp/features.hpp"

namespace icp {

std::string_view to_string(Algorithm algorithm) noexcept {
    return algorithm == Algorithm::Harris ? "harris" : "sift";
}

Algorithm parse_algorithm(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "harris") return Algorithm::Harris;
    if (lower == "sift") return Algorithm::Sift;
    throw Error(ErrorCode::InvalidArgument, "unknown algorithm '" + std::string(name) + "'");
}

std::vector<MatchPair> match_descriptors(const DescriptorSet& a, const DescriptorSet& b, double ratio) {
    if (a.dim != b.dim) {
        throw Error(ErrorCode::DimensionMismatch,
                    "descriptor dimensions " + std::to_string(a.dim) + " and " + std::to_string(b.dim));
    }
    std::vector<MatchPair> matches;
    if (b.empty()) return matches;
    const double ratio_sq = ratio * ratio;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto da = a.row(i);
        double best = std::numeric_limits<double>::infinity();
        double second = std::numeric_limits<double>::infinity();
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < b.size(); ++j) {
            const auto db = b.row(j);
            double dist = 0;
            for (std::size_t k = 0; k < a.dim; ++k) {
                const double diff = static_cast<double>(da[k]) - db[k];
                dist += diff * diff;
            }
            if (dist < best) {
                second = best;
                best = dist;
                best_j = j;
            } else if (dist < second) {
                second = dist;
            }
        }
        if (best < ratio_sq * second) matches.emplace_back(i, best_j);
    }
    return matches;
}

ImageFeatures extract_features(Algorithm algorithm, const PImage& img) {
    ImageFeatures out;
    out.filename = img.filename;
    const PixelMatrix grey = to_grey(img.matrix);
    if (algorithm == Algorithm::Harris) {
        out.keypoints = harris(grey);
        out.descriptors.values.clear();
    } else {
        auto sift = sift_extract(grey);
        out.keypoints = std::move(sift.keypoints);
        out.descriptors = std::move(sift.descriptors);
    }
    return out;
}

}  // namespace icp

#pragma once

#include <vector>

#include "icp/pimage.hpp"

namespace icp::detail {

struct FloatImage {
    int width = 0;
    int height = 0;
    std::vector<float> px;

    FloatImage() = default;
    FloatImage(int w, int h) : width(w), height(h), px(static_cast<std::size_t>(w) * h, 0.0f) {}

    float& at(int x, int y) { return px[static_cast<std::size_t>(y) * width + x]; }
    float at(int x, int y) const { return px[static_cast<std::size_t>(y) * width + x]; }
    float clamped(int x, int y) const;
};

FloatImage to_float(const PixelMatrix& grey, float scale);

std::vector<float> gaussian_kernel(double sigma);

// Separable blur with replicated borders.
FloatImage gaussian_blur(const FloatImage& src, double sigma);

// Every second sample starting at 0; output is ceil(w/2) x ceil(h/2).
FloatImage downsample(const FloatImage& src);

FloatImage upsample_bilinear(const FloatImage& src);

}  // namespace icp::detail

#include "filters.hpp"

#include <algorithm>
#include <cmath>

namespace icp::detail {

float FloatImage::clamped(int x, int y) const {
    return at(std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1));
}

FloatImage to_float(const PixelMatrix& grey, float scale) {
    FloatImage out(static_cast<int>(grey.width), static_cast<int>(grey.height));
    for (std::size_t i = 0; i < out.px.size(); ++i) out.px[i] = static_cast<float>(grey.data[i]) * scale;
    return out;
}

std::vector<float> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> k(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        double w = std::exp(-0.5 * i * i / (sigma * sigma));
        k[i + radius] = static_cast<float>(w);
        sum += w;
    }
    for (float& w : k) w = static_cast<float>(w / sum);
    return k;
}

FloatImage gaussian_blur(const FloatImage& src, double sigma) {
    const auto kernel = gaussian_kernel(sigma);
    const int radius = static_cast<int>(kernel.size() / 2);
    const int w = src.width;
    const int h = src.height;

    FloatImage tmp(w, h);
    std::vector<float> row(w + 2 * radius);
    for (int y = 0; y < h; ++y) {
        for (int x = -radius; x < w + radius; ++x) row[x + radius] = src.at(std::clamp(x, 0, w - 1), y);
        for (int x = 0; x < w; ++x) {
            float acc = 0;
            for (int i = 0; i < static_cast<int>(kernel.size()); ++i) acc += kernel[i] * row[x + i];
            tmp.at(x, y) = acc;
        }
    }

    FloatImage out(w, h);
    std::vector<float> acc(w);
    for (int y = 0; y < h; ++y) {
        std::fill(acc.begin(), acc.end(), 0.0f);
        for (int i = 0; i < static_cast<int>(kernel.size()); ++i) {
            const float kw = kernel[i];
            const float* line = &tmp.px[static_cast<std::size_t>(std::clamp(y + i - radius, 0, h - 1)) * w];
            for (int x = 0; x < w; ++x) acc[x] += kw * line[x];
        }
        std::copy(acc.begin(), acc.end(), &out.px[static_cast<std::size_t>(y) * w]);
    }
    return out;
}

FloatImage downsample(const FloatImage& src) {
    FloatImage out((src.width + 1) / 2, (src.height + 1) / 2);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) out.at(x, y) = src.at(2 * x, 2 * y);
    }
    return out;
}

FloatImage upsample_bilinear(const FloatImage& src) {
    FloatImage out(src.width * 2, src.height * 2);
    for (int y = 0; y < out.height; ++y) {
        const float sy = std::min(y * 0.5f, static_cast<float>(src.height - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const float fy = sy - y0;
        for (int x = 0; x < out.width; ++x) {
            const float sx = std::min(x * 0.5f, static_cast<float>(src.width - 1));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const float fx = sx - x0;
            const float top = src.at(x0, y0) * (1 - fx) + src.at(x1, y0) * fx;
            const float bottom = src.at(x0, y1) * (1 - fx) + src.at(x1, y1) * fx;
            out.at(x, y) = top * (1 - fy) + bottom * fy;
        }
    }
    return out;
}

}  // namespace icp::detail

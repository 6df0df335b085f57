#include <algorithm>
#include <cmath>

#include "icp/error.hpp"
#include "icp/features.hpp"

namespace icp {

namespace {

struct Plane {
    int width;
    int height;
    std::vector<double> v;

    Plane(int w, int h) : width(w), height(h), v(static_cast<std::size_t>(w) * h, 0.0) {}
    double& at(int x, int y) { return v[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
    double clamped(int x, int y) const { return at(std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1)); }
};

Plane blur(const Plane& src, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) sum += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& w : kernel) w /= sum;

    Plane tmp(src.width, src.height);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * src.clamped(x + i, y);
            tmp.at(x, y) = acc;
        }
    }
    Plane out(src.width, src.height);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp.clamped(x, y + i);
            out.at(x, y) = acc;
        }
    }
    return out;
}

// Parabola vertex through (-1, a), (0, b), (1, c), limited to half a pixel.
double peak_offset(double a, double b, double c) {
    const double denom = a - 2 * b + c;
    if (denom >= 0) return 0;
    return std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
}

}  // namespace

std::vector<Keypoint> harris(const PixelMatrix& img, const HarrisParams& params) {
    if (img.mode != ColorMode::Grey) throw Error(ErrorCode::WrongColorMode, "harris needs a grey image");
    if (img.width < 8 || img.height < 8) {
        throw Error(ErrorCode::ImageTooSmall, "harris needs at least 8x8 pixels");
    }
    if (params.sigma <= 0 || params.response_threshold <= 0 || params.nms_radius < 1) {
        throw Error(ErrorCode::InvalidArgument, "harris parameters must be positive");
    }
    const int w = static_cast<int>(img.width);
    const int h = static_cast<int>(img.height);
    Plane intensity(w, h);
    for (std::size_t i = 0; i < intensity.v.size(); ++i) intensity.v[i] = img.data[i];

    Plane ixx(w, h), iyy(w, h), ixy(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            auto p = [&](int dx, int dy) { return intensity.clamped(x + dx, y + dy); };
            const double gx = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
            const double gy = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
            ixx.at(x, y) = gx * gx;
            iyy.at(x, y) = gy * gy;
            ixy.at(x, y) = gx * gy;
        }
    }
    const Plane sxx = blur(ixx, params.sigma);
    const Plane syy = blur(iyy, params.sigma);
    const Plane sxy = blur(ixy, params.sigma);

    Plane response(w, h);
    double max_response = 0;
    for (std::size_t i = 0; i < response.v.size(); ++i) {
        const double det = sxx.v[i] * syy.v[i] - sxy.v[i] * sxy.v[i];
        const double trace = sxx.v[i] + syy.v[i];
        response.v[i] = det - params.k * trace * trace;
        max_response = std::max(max_response, response.v[i]);
    }
    if (max_response <= 0) return {};

    const double threshold = params.response_threshold * max_response;
    const int r = params.nms_radius;
    std::vector<Keypoint> corners;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double value = response.at(x, y);
            if (value <= threshold) continue;
            bool is_max = true;
            for (int qy = std::max(0, y - r); qy <= std::min(h - 1, y + r) && is_max; ++qy) {
                for (int qx = std::max(0, x - r); qx <= std::min(w - 1, x + r); ++qx) {
                    const double other = response.at(qx, qy);
                    // Plateaus keep their first pixel in raster order.
                    const bool earlier = qy < y || (qy == y && qx < x);
                    if (other > value || (other == value && earlier)) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (!is_max) continue;
            double fx = x;
            double fy = y;
            if (x > 0 && x < w - 1) fx += peak_offset(response.at(x - 1, y), value, response.at(x + 1, y));
            if (y > 0 && y < h - 1) fy += peak_offset(response.at(x, y - 1), value, response.at(x, y + 1));
            Keypoint kp;
            kp.x = std::clamp(static_cast<float>(fx), 0.0f, std::nextafter(static_cast<float>(w), 0.0f));
            kp.y = std::clamp(static_cast<float>(fy), 0.0f, std::nextafter(static_cast<float>(h), 0.0f));
            kp.scale = static_cast<float>(params.sigma);
            kp.orientation = 0;
            kp.response = static_cast<float>(value);
            corners.push_back(kp);
        }
    }
    std::stable_sort(corners.begin(), corners.end(),
                     [](const Keypoint& a, const Keypoint& b) { return a.response > b.response; });
    return corners;
}

}  // namespace icp

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>

#include "filters.hpp"
#include "icp/error.hpp"
#include "icp/features.hpp"

namespace icp {

namespace {

using detail::FloatImage;

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kDescWidth = 4;
constexpr int kDescBins = 8;
constexpr double kOrientationSigmaFactor = 1.5;
constexpr double kOrientationRadiusFactor = 3.0;
constexpr double kDescScaleFactor = 3.0;

struct Octave {
    std::vector<FloatImage> gauss;  // scales_per_octave + 3 levels
    std::vector<FloatImage> dog;    // scales_per_octave + 2 levels
};

std::vector<Octave> build_pyramid(FloatImage base, const SiftParams& p) {
    const int s = p.scales_per_octave;
    const int levels = s + 3;
    const int min_dim = std::min(base.width, base.height);
    const int octaves = std::max(1, static_cast<int>(std::floor(std::log2(min_dim))) - 2);

    // Incremental blur taking level i-1 to level i.
    std::vector<double> step(levels);
    const double k = std::pow(2.0, 1.0 / s);
    step[0] = p.sigma;
    for (int i = 1; i < levels; ++i) {
        const double prev = p.sigma * std::pow(k, i - 1);
        const double total = prev * k;
        step[i] = std::sqrt(total * total - prev * prev);
    }

    std::vector<Octave> pyramid(octaves);
    for (int o = 0; o < octaves; ++o) {
        Octave& oct = pyramid[o];
        oct.gauss.reserve(levels);
        if (o == 0) {
            oct.gauss.push_back(std::move(base));
        } else {
            oct.gauss.push_back(detail::downsample(pyramid[o - 1].gauss[s]));
        }
        for (int i = 1; i < levels; ++i) oct.gauss.push_back(detail::gaussian_blur(oct.gauss[i - 1], step[i]));
        oct.dog.reserve(levels - 1);
        for (int i = 0; i + 1 < levels; ++i) {
            FloatImage d(oct.gauss[i].width, oct.gauss[i].height);
            for (std::size_t j = 0; j < d.px.size(); ++j) d.px[j] = oct.gauss[i + 1].px[j] - oct.gauss[i].px[j];
            oct.dog.push_back(std::move(d));
        }
    }
    return pyramid;
}

bool is_extremum(const Octave& oct, int layer, int x, int y) {
    const float v = oct.dog[layer].at(x, y);
    const bool want_max = v > 0;
    for (int l = layer - 1; l <= layer + 1; ++l) {
        const FloatImage& img = oct.dog[l];
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (l == layer && dx == 0 && dy == 0) continue;
                const float n = img.at(x + dx, y + dy);
                if (want_max ? n > v : n < v) return false;
            }
        }
    }
    return true;
}

struct Refined {
    int layer;
    int x;
    int y;
    double off_x;
    double off_y;
    double off_s;
    double contrast;
};

// 3x3 solve by Cramer's rule; nullopt when singular.
std::optional<std::array<double, 3>> solve3(const std::array<std::array<double, 3>, 3>& m,
                                            const std::array<double, 3>& b) {
    auto det3 = [](const std::array<std::array<double, 3>, 3>& a) {
        return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
               a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    };
    const double det = det3(m);
    if (std::abs(det) < 1e-15) return std::nullopt;
    std::array<double, 3> x{};
    for (int c = 0; c < 3; ++c) {
        auto mc = m;
        for (int r = 0; r < 3; ++r) mc[r][c] = b[r];
        x[c] = det3(mc) / det;
    }
    return x;
}

std::optional<Refined> refine(const Octave& oct, int layer, int x, int y, const SiftParams& p) {
    const int s = p.scales_per_octave;
    const int w = oct.dog[0].width;
    const int h = oct.dog[0].height;
    for (int iter = 0; iter < p.max_refine_iterations; ++iter) {
        const FloatImage& prev = oct.dog[layer - 1];
        const FloatImage& cur = oct.dog[layer];
        const FloatImage& next = oct.dog[layer + 1];
        const double v2 = 2.0 * cur.at(x, y);
        const std::array<double, 3> g{(cur.at(x + 1, y) - cur.at(x - 1, y)) * 0.5,
                                      (cur.at(x, y + 1) - cur.at(x, y - 1)) * 0.5,
                                      (next.at(x, y) - prev.at(x, y)) * 0.5};
        const double dxx = cur.at(x + 1, y) + cur.at(x - 1, y) - v2;
        const double dyy = cur.at(x, y + 1) + cur.at(x, y - 1) - v2;
        const double dss = next.at(x, y) + prev.at(x, y) - v2;
        const double dxy =
            (cur.at(x + 1, y + 1) - cur.at(x - 1, y + 1) - cur.at(x + 1, y - 1) + cur.at(x - 1, y - 1)) * 0.25;
        const double dxs = (next.at(x + 1, y) - next.at(x - 1, y) - prev.at(x + 1, y) + prev.at(x - 1, y)) * 0.25;
        const double dys = (next.at(x, y + 1) - next.at(x, y - 1) - prev.at(x, y + 1) + prev.at(x, y - 1)) * 0.25;
        const auto off = solve3({{{dxx, dxy, dxs}, {dxy, dyy, dys}, {dxs, dys, dss}}}, {-g[0], -g[1], -g[2]});
        if (!off) return std::nullopt;
        const auto [ox, oy, os] = *off;

        if (std::abs(ox) < 0.5 && std::abs(oy) < 0.5 && std::abs(os) < 0.5) {
            const double contrast = cur.at(x, y) + 0.5 * (g[0] * ox + g[1] * oy + g[2] * os);
            if (std::abs(contrast) < p.contrast_threshold) return std::nullopt;
            const double trace = dxx + dyy;
            const double det = dxx * dyy - dxy * dxy;
            const double r = p.edge_ratio;
            if (det <= 0 || trace * trace * r >= (r + 1) * (r + 1) * det) return std::nullopt;
            return Refined{layer, x, y, ox, oy, os, contrast};
        }
        if (std::abs(ox) > 1e3 || std::abs(oy) > 1e3 || std::abs(os) > 1e3) return std::nullopt;
        x += static_cast<int>(std::lround(ox));
        y += static_cast<int>(std::lround(oy));
        layer += static_cast<int>(std::lround(os));
        if (layer < 1 || layer > s || x < p.border || x >= w - p.border || y < p.border || y >= h - p.border) {
            return std::nullopt;
        }
    }
    return std::nullopt;
}

void gradient(const FloatImage& img, int x, int y, double& dx, double& dy) {
    dx = static_cast<double>(img.at(x + 1, y)) - img.at(x - 1, y);
    dy = static_cast<double>(img.at(x, y + 1)) - img.at(x, y - 1);
}

double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0) a += kTwoPi;
    if (a >= kTwoPi) a = 0;
    return a;
}

std::vector<double> dominant_orientations(const FloatImage& img, int x, int y, double sigma_octave,
                                          const SiftParams& p) {
    const int n = p.orientation_bins;
    const double sigma = kOrientationSigmaFactor * sigma_octave;
    const int radius = static_cast<int>(std::lround(kOrientationRadiusFactor * sigma));
    std::vector<double> hist(n, 0.0);
    for (int j = -radius; j <= radius; ++j) {
        const int py = y + j;
        if (py <= 0 || py >= img.height - 1) continue;
        for (int i = -radius; i <= radius; ++i) {
            const int px = x + i;
            if (px <= 0 || px >= img.width - 1) continue;
            double dx, dy;
            gradient(img, px, py, dx, dy);
            const double weight = std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
            const double angle = wrap_angle(std::atan2(dy, dx));
            int bin = static_cast<int>(std::lround(n * angle / kTwoPi));
            if (bin >= n) bin -= n;
            hist[bin] += weight * std::hypot(dx, dy);
        }
    }
    std::vector<double> smooth(n);
    for (int b = 0; b < n; ++b) {
        auto at = [&](int k) { return hist[((b + k) % n + n) % n]; };
        smooth[b] = (at(-2) + at(2)) * (1.0 / 16) + (at(-1) + at(1)) * (4.0 / 16) + at(0) * (6.0 / 16);
    }
    const double peak = *std::max_element(smooth.begin(), smooth.end());
    std::vector<double> out;
    if (peak <= 0) return out;
    for (int b = 0; b < n; ++b) {
        const double left = smooth[(b + n - 1) % n];
        const double right = smooth[(b + 1) % n];
        const double c = smooth[b];
        if (c > left && c > right && c >= p.orientation_peak_ratio * peak) {
            const double offset = 0.5 * (left - right) / (left - 2 * c + right);
            out.push_back(wrap_angle(kTwoPi * (b + offset) / n));
        }
    }
    return out;
}

// 4x4 spatial cells x 8 orientation bins with trilinear interpolation, in the
// frame rotated so the keypoint orientation points along +x.
bool describe(const FloatImage& img, int x, int y, double sigma_octave, double orientation, std::span<float> dst) {
    constexpr int d = kDescWidth;
    constexpr int n = kDescBins;
    const double hist_width = kDescScaleFactor * sigma_octave;
    const double diag = std::hypot(img.width, img.height);
    const int radius = static_cast<int>(
        std::min(std::lround(hist_width * std::numbers::sqrt2 * (d + 1) * 0.5), static_cast<long>(diag)));
    const double cos_t = std::cos(orientation) / hist_width;
    const double sin_t = std::sin(orientation) / hist_width;
    const double exp_scale = -1.0 / (d * d * 0.5);
    const double bins_per_rad = n / kTwoPi;

    std::array<double, (d + 2) * (d + 2) * (n + 2)> hist{};
    for (int j = -radius; j <= radius; ++j) {      // y offset
        for (int i = -radius; i <= radius; ++i) {  // x offset
            const double c_rot = i * cos_t + j * sin_t;
            const double r_rot = -i * sin_t + j * cos_t;
            const double rbin = r_rot + d / 2.0 - 0.5;
            const double cbin = c_rot + d / 2.0 - 0.5;
            const int px = x + i;
            const int py = y + j;
            if (rbin <= -1 || rbin >= d || cbin <= -1 || cbin >= d) continue;
            if (px <= 0 || px >= img.width - 1 || py <= 0 || py >= img.height - 1) continue;
            double dx, dy;
            gradient(img, px, py, dx, dy);
            const double mag = std::hypot(dx, dy) * std::exp((c_rot * c_rot + r_rot * r_rot) * exp_scale);
            double obin = wrap_angle(std::atan2(dy, dx) - orientation) * bins_per_rad;

            const int r0 = static_cast<int>(std::floor(rbin));
            const int c0 = static_cast<int>(std::floor(cbin));
            int o0 = static_cast<int>(std::floor(obin));
            const double fr = rbin - r0;
            const double fc = cbin - c0;
            const double fo = obin - o0;
            if (o0 < 0) o0 += n;
            if (o0 >= n) o0 -= n;

            for (int a = 0; a < 2; ++a) {
                const double wr = a ? fr : 1 - fr;
                for (int b = 0; b < 2; ++b) {
                    const double wc = b ? fc : 1 - fc;
                    const std::size_t base = ((r0 + 1 + a) * (d + 2) + (c0 + 1 + b)) * (n + 2) + o0;
                    hist[base] += mag * wr * wc * (1 - fo);
                    hist[base + 1] += mag * wr * wc * fo;
                }
            }
        }
    }
    for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) {
            const std::size_t base = ((r + 1) * (d + 2) + (c + 1)) * (n + 2);
            hist[base] += hist[base + n];
            hist[base + 1] += hist[base + n + 1];
            for (int o = 0; o < n; ++o) dst[(r * d + c) * n + o] = static_cast<float>(hist[base + o]);
        }
    }
    return normalize_descriptor(dst);
}

}  // namespace

bool normalize_descriptor(std::span<float> values, float clamp) {
    double sum = 0;
    for (float v : values) sum += static_cast<double>(v) * v;
    if (sum <= 0) return false;
    const double threshold = clamp * std::sqrt(sum);
    sum = 0;
    for (float& v : values) {
        v = static_cast<float>(std::min<double>(v, threshold));
        sum += static_cast<double>(v) * v;
    }
    const double scale = 1.0 / std::sqrt(sum);
    for (float& v : values) v = static_cast<float>(v * scale);
    return true;
}

SiftResult sift_extract(const PixelMatrix& img, const SiftParams& p) {
    if (img.mode != ColorMode::Grey) throw Error(ErrorCode::WrongColorMode, "sift needs a grey image");
    if (std::min(img.width, img.height) < 16) {
        throw Error(ErrorCode::ImageTooSmall, "sift needs a minimum dimension of 16 pixels");
    }
    if (p.scales_per_octave < 1 || p.sigma <= p.input_sigma || p.orientation_bins < 4) {
        throw Error(ErrorCode::InvalidArgument, "invalid sift parameters");
    }

    FloatImage base = detail::to_float(img, 1.0f / 255.0f);
    double present = p.input_sigma;
    if (p.upsample) {
        base = detail::upsample_bilinear(base);
        present *= 2;
    }
    base = detail::gaussian_blur(base, std::sqrt(p.sigma * p.sigma - present * present));
    const auto pyramid = build_pyramid(std::move(base), p);

    const int s = p.scales_per_octave;
    const double prefilter = 0.5 * p.contrast_threshold;
    SiftResult result;
    std::vector<float> desc(kDescWidth * kDescWidth * kDescBins);
    for (int o = 0; o < static_cast<int>(pyramid.size()); ++o) {
        const Octave& oct = pyramid[o];
        const int w = oct.dog[0].width;
        const int h = oct.dog[0].height;
        const double to_input = std::ldexp(1.0, o) * (p.upsample ? 0.5 : 1.0);
        for (int layer = 1; layer <= s; ++layer) {
            const FloatImage& dog = oct.dog[layer];
            for (int y = p.border; y < h - p.border; ++y) {
                for (int x = p.border; x < w - p.border; ++x) {
                    if (std::abs(dog.at(x, y)) <= prefilter) continue;
                    if (!is_extremum(oct, layer, x, y)) continue;
                    const auto kp = refine(oct, layer, x, y, p);
                    if (!kp) continue;
                    const double sigma_octave = p.sigma * std::pow(2.0, (kp->layer + kp->off_s) / s);
                    const FloatImage& g = oct.gauss[kp->layer];
                    Keypoint base_kp;
                    base_kp.x = std::clamp(static_cast<float>((kp->x + kp->off_x) * to_input), 0.0f,
                                           std::nextafter(static_cast<float>(img.width), 0.0f));
                    base_kp.y = std::clamp(static_cast<float>((kp->y + kp->off_y) * to_input), 0.0f,
                                           std::nextafter(static_cast<float>(img.height), 0.0f));
                    base_kp.scale = static_cast<float>(sigma_octave * to_input);
                    base_kp.response = static_cast<float>(std::abs(kp->contrast));
                    for (double angle : dominant_orientations(g, kp->x, kp->y, sigma_octave, p)) {
                        if (!describe(g, kp->x, kp->y, sigma_octave, angle, desc)) continue;
                        Keypoint out = base_kp;
                        out.orientation = static_cast<float>(angle);
                        if (out.orientation >= static_cast<float>(kTwoPi)) out.orientation = 0;
                        result.keypoints.push_back(out);
                        result.descriptors.values.insert(result.descriptors.values.end(), desc.begin(), desc.end());
                    }
                }
            }
        }
    }
    return result;
}

}  // namespace icp

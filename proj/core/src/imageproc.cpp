#include "ninepatch/imageproc.hpp"

#include "ninepatch/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <string>

namespace ninepatch::imageproc {

namespace {

inline int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

void require_nonempty(const GrayImage& img, const char* fn) {
    if (img.width <= 0 || img.height <= 0 ||
        img.data.size() != static_cast<std::size_t>(img.width) * img.height) {
        throw InvalidInput(std::string(fn) + ": empty or malformed image");
    }
}

}  // namespace

GrayImage::GrayImage(int w, int h, double fill)
    : width(w), height(h), data(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0), fill) {}

RgbImage::RgbImage(int w, int h, double fill)
    : width(w), height(h), data(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0) * 3, fill) {}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

GrayImage to_grayscale(const RgbImage& rgb) {
    if (rgb.width <= 0 || rgb.height <= 0 ||
        rgb.data.size() != static_cast<std::size_t>(rgb.width) * rgb.height * 3) {
        throw InvalidInput("to_grayscale: empty or malformed image");
    }
    GrayImage out(rgb.width, rgb.height);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double r = rgb.data[3 * i];
        const double g = rgb.data[3 * i + 1];
        const double b = rgb.data[3 * i + 2];
        out.data[i] = std::clamp(0.299 * r + 0.587 * g + 0.114 * b, 0.0, 1.0);
    }
    return out;
}

GrayImage crop(const GrayImage& img, const CropBox& box) {
    require_nonempty(img, "crop");
    if (box.top < 0 || box.left < 0 || box.height <= 0 || box.width <= 0 ||
        box.top + box.height > img.height || box.left + box.width > img.width) {
        throw OutOfBounds("crop: box [" + std::to_string(box.top) + " " + std::to_string(box.left) + " " +
                          std::to_string(box.height) + " " + std::to_string(box.width) + "] exceeds " +
                          std::to_string(img.height) + "x" + std::to_string(img.width) + " image");
    }
    GrayImage out(box.width, box.height);
    for (int r = 0; r < box.height; ++r) {
        const auto src = img.data.begin() + static_cast<std::ptrdiff_t>(box.top + r) * img.width + box.left;
        std::copy(src, src + box.width, out.data.begin() + static_cast<std::ptrdiff_t>(r) * box.width);
    }
    return out;
}

GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h) {
    require_nonempty(img, "resize_bilinear");
    if (out_w < 1 || out_h < 1) {
        throw InvalidInput("resize_bilinear: target dimensions must be >= 1");
    }
    if (out_w == img.width && out_h == img.height) {
        return img;
    }

    auto source_coord = [](int i, int in, int out) {
        if (out == 1) return (in - 1) / 2.0;
        return static_cast<double>(i) * (in - 1) / (out - 1);
    };

    GrayImage out(out_w, out_h);
    for (int r = 0; r < out_h; ++r) {
        const double sy = source_coord(r, img.height, out_h);
        const int y0 = std::min(static_cast<int>(std::floor(sy)), img.height - 1);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double fy = sy - y0;
        for (int c = 0; c < out_w; ++c) {
            const double sx = source_coord(c, img.width, out_w);
            const int x0 = std::min(static_cast<int>(std::floor(sx)), img.width - 1);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double fx = sx - x0;
            const double top = img.at(y0, x0) * (1.0 - fx) + img.at(y0, x1) * fx;
            const double bottom = img.at(y1, x0) * (1.0 - fx) + img.at(y1, x1) * fx;
            out.at(r, c) = std::clamp(top * (1.0 - fy) + bottom * fy, 0.0, 1.0);
        }
    }
    return out;
}

GrayImage convolve(const GrayImage& img, const Kernel& k) {
    require_nonempty(img, "convolve");
    if (k.size < 1 || k.size % 2 == 0) {
        throw InvalidInput("convolve: kernel size must be odd, got " + std::to_string(k.size));
    }
    if (k.values.size() != static_cast<std::size_t>(k.size) * k.size) {
        throw InvalidInput("convolve: kernel has " + std::to_string(k.values.size()) + " values for size " +
                           std::to_string(k.size));
    }
    const int half = k.size / 2;
    GrayImage out(img.width, img.height);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            double acc = 0.0;
            for (int i = 0; i < k.size; ++i) {
                const int sr = clamp_index(r + half - i, img.height);
                for (int j = 0; j < k.size; ++j) {
                    const int sc = clamp_index(c + half - j, img.width);
                    acc += k.at(i, j) * img.at(sr, sc);
                }
            }
            out.at(r, c) = acc;
        }
    }
    return out;
}

Kernel gaussian_kernel(int size, double sigma) {
    if (size < 1 || size % 2 == 0) {
        throw InvalidInput("gaussian_kernel: size must be odd and positive");
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw InvalidInput("gaussian_kernel: sigma must be positive");
    }
    const int half = size / 2;
    const double denom = 2.0 * sigma * sigma;

    // Built as an outer product of the normalized 1-D profile so the kernel is
    // exactly separable and symmetric.
    std::vector<double> profile(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) {
        const double x = i - half;
        profile[static_cast<std::size_t>(i)] = std::exp(-(x * x) / denom);
    }
    const double sum = std::accumulate(profile.begin(), profile.end(), 0.0);
    for (double& p : profile) p /= sum;

    Kernel k;
    k.size = size;
    k.values.assign(static_cast<std::size_t>(size) * size, 0.0);
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            k.values[static_cast<std::size_t>(i) * size + j] =
                profile[static_cast<std::size_t>(i)] * profile[static_cast<std::size_t>(j)];
        }
    }
    return k;
}

Gradients sobel_gradients(const GrayImage& img) {
    require_nonempty(img, "sobel_gradients");
    if (img.width < 3 || img.height < 3) {
        throw InvalidInput("sobel: image must be at least 3x3");
    }
    Gradients g{GrayImage(img.width, img.height), GrayImage(img.width, img.height)};
    for (int r = 0; r < img.height; ++r) {
        const int up = clamp_index(r - 1, img.height);
        const int down = clamp_index(r + 1, img.height);
        for (int c = 0; c < img.width; ++c) {
            const int left = clamp_index(c - 1, img.width);
            const int right = clamp_index(c + 1, img.width);
            g.gx.at(r, c) = (img.at(up, right) + 2.0 * img.at(r, right) + img.at(down, right)) -
                            (img.at(up, left) + 2.0 * img.at(r, left) + img.at(down, left));
            g.gy.at(r, c) = (img.at(down, left) + 2.0 * img.at(down, c) + img.at(down, right)) -
                            (img.at(up, left) + 2.0 * img.at(up, c) + img.at(up, right));
        }
    }
    return g;
}

namespace {

GrayImage normalized_magnitude(const Gradients& g) {
    GrayImage mag(g.gx.width, g.gx.height);
    double peak = 0.0;
    for (std::size_t i = 0; i < mag.data.size(); ++i) {
        mag.data[i] = std::hypot(g.gx.data[i], g.gy.data[i]);
        peak = std::max(peak, mag.data[i]);
    }
    if (peak > 0.0) {
        for (double& v : mag.data) v /= peak;
    }
    return mag;
}

}  // namespace

GrayImage sobel_magnitude(const GrayImage& img) { return normalized_magnitude(sobel_gradients(img)); }

BinaryMask canny(const GrayImage& img, double low, double high) {
    if (!(low >= 0.0 && low <= high && high <= 1.0)) {
        throw InvalidInput("canny: thresholds must satisfy 0 <= low <= high <= 1");
    }
    const Gradients g = sobel_gradients(img);
    const GrayImage mag = normalized_magnitude(g);
    const int w = img.width;
    const int h = img.height;

    // Non-maximum suppression. Ties are broken asymmetrically (strict against
    // one neighbour, non-strict against the other) so plateaus thin to 1 px.
    GrayImage thin(w, h);
    for (int r = 1; r + 1 < h; ++r) {
        for (int c = 1; c + 1 < w; ++c) {
            const double m = mag.at(r, c);
            if (m <= 0.0) continue;
            double angle = std::atan2(g.gy.at(r, c), g.gx.at(r, c)) * 180.0 / 3.14159265358979323846;
            if (angle < 0.0) angle += 180.0;
            double a = 0.0;
            double b = 0.0;
            if (angle < 22.5 || angle >= 157.5) {
                a = mag.at(r, c - 1);
                b = mag.at(r, c + 1);
            } else if (angle < 67.5) {
                a = mag.at(r - 1, c - 1);
                b = mag.at(r + 1, c + 1);
            } else if (angle < 112.5) {
                a = mag.at(r - 1, c);
                b = mag.at(r + 1, c);
            } else {
                a = mag.at(r - 1, c + 1);
                b = mag.at(r + 1, c - 1);
            }
            if (m > a && m >= b) thin.at(r, c) = m;
        }
    }

    BinaryMask out(w, h);
    std::deque<std::pair<int, int>> frontier;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (thin.at(r, c) > high) {
                out.set(r, c);
                frontier.emplace_back(r, c);
            }
        }
    }
    while (!frontier.empty()) {
        const auto [r, c] = frontier.front();
        frontier.pop_front();
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                const int nr = r + dr;
                const int nc = c + dc;
                if (nr < 0 || nc < 0 || nr >= h || nc >= w || out.at(nr, nc)) continue;
                if (thin.at(nr, nc) > low) {
                    out.set(nr, nc);
                    frontier.emplace_back(nr, nc);
                }
            }
        }
    }
    return out;
}

BinaryMask threshold_mask(const GrayImage& img, double t) {
    BinaryMask out(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        out.bits[i] = img.data[i] > t ? 1 : 0;
    }
    return out;
}

std::vector<double> standardize(std::span<const double> values) {
    if (values.empty()) {
        throw InvalidInput("standardize: empty vector");
    }
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / n);

    std::vector<double> out(values.size(), 0.0);
    if (sd < 1e-8) return out;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / sd;
    return out;
}

}  // namespace ninepatch::imageproc

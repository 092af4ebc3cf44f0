#pragma once

#include "ninepatch/imageproc.hpp"
#include "ninepatch/rng.hpp"

#include <algorithm>
#include <cmath>

namespace ninepatch::testing {

inline imageproc::GrayImage random_image(int w, int h, Rng& rng) {
    imageproc::GrayImage img(w, h);
    for (double& v : img.data) v = rng.uniform();
    return img;
}

inline double max_abs_diff(const imageproc::GrayImage& a, const imageproc::GrayImage& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) d = std::max(d, std::abs(a.data[i] - b.data[i]));
    return d;
}

inline int clamp_to(int i, int n) { return std::clamp(i, 0, n - 1); }

// Nested-loop reference: true convolution with edge replication.
inline imageproc::GrayImage convolve_reference(const imageproc::GrayImage& img, const imageproc::Kernel& k) {
    imageproc::GrayImage out(img.width, img.height);
    const int half = k.size / 2;
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            double acc = 0.0;
            for (int dy = -half; dy <= half; ++dy) {
                for (int dx = -half; dx <= half; ++dx) {
                    acc += k.at(half - dy, half - dx) * img.at(clamp_to(r + dy, img.height), clamp_to(c + dx, img.width));
                }
            }
            out.at(r, c) = acc;
        }
    }
    return out;
}

// Correlation with the textbook Sobel masks.
inline imageproc::Gradients sobel_reference(const imageproc::GrayImage& img) {
    static const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    static const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
    imageproc::Gradients g{imageproc::GrayImage(img.width, img.height), imageproc::GrayImage(img.width, img.height)};
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            double sx = 0.0, sy = 0.0;
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    const double v = img.at(clamp_to(r + i - 1, img.height), clamp_to(c + j - 1, img.width));
                    sx += kx[i][j] * v;
                    sy += ky[i][j] * v;
                }
            }
            g.gx.at(r, c) = sx;
            g.gy.at(r, c) = sy;
        }
    }
    return g;
}

}  // namespace ninepatch::testing

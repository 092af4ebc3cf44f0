#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ninepatch::imageproc {

/// Single-channel image, row-major, luminance in [0, 1].
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0);

    bool empty() const { return data.empty(); }
    double& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
    double at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }

    bool operator==(const GrayImage&) const = default;
};

/// Three-channel image, interleaved RGB, channel values in [0, 1].
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    RgbImage() = default;
    RgbImage(int w, int h, double fill = 0.0);

    bool empty() const { return data.empty(); }
};

/// Crop window in pixel units; top/left are the zero-based window origin.
struct CropBox {
    int top = 0;
    int left = 0;
    int height = 0;
    int width = 0;
};

/// Square convolution kernel of odd side, row-major.
struct Kernel {
    int size = 1;
    std::vector<double> values{1.0};

    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * size + col]; }
};

struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    bool at(int row, int col) const { return bits[static_cast<std::size_t>(row) * width + col] != 0; }
    void set(int row, int col, bool on = true) {
        bits[static_cast<std::size_t>(row) * width + col] = on ? 1 : 0;
    }
    std::size_t count() const;
};

/// Raw Sobel responses before any normalization.
struct Gradients {
    GrayImage gx;
    GrayImage gy;
};

// BT.601 luma: 0.299 R + 0.587 G + 0.114 B, clamped to [0, 1].
GrayImage to_grayscale(const RgbImage& rgb);

/// Copies the window `box` out of `img`. Throws OutOfBounds when the box does
/// not fit; no clamping is performed.
GrayImage crop(const GrayImage& img, const CropBox& box);

/// Bilinear resampling with corner-aligned sampling: output pixel i maps to
/// source coordinate i * (in - 1) / (out - 1). A same-size resize is an exact
/// copy.
GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h);

/// Same-size 2-D convolution (kernel flipped) with edge replication at the border.
GrayImage convolve(const GrayImage& img, const Kernel& k);

/// Normalized Gaussian on the centered integer lattice.
Kernel gaussian_kernel(int size, double sigma);

/// 3x3 Sobel derivatives with edge replication. gx responds to left-to-right
/// increases, gy to top-to-bottom increases.
Gradients sobel_gradients(const GrayImage& img);

/// Gradient magnitude sqrt(gx^2 + gy^2) rescaled so the maximum is 1.
/// A gradient-free image yields all zeros.
GrayImage sobel_magnitude(const GrayImage& img);

/// Canny edge detector on the max-normalized Sobel magnitude: non-maximum
/// suppression along the gradient direction quantized to 4 bins, then double
/// threshold (strong > high, weak > low) and 8-connected hysteresis. The
/// outermost pixel ring is never marked.
BinaryMask canny(const GrayImage& img, double low = 0.1, double high = 0.2);

/// Bit set iff the pixel value is strictly greater than t.
BinaryMask threshold_mask(const GrayImage& img, double t);

/// Zero mean, unit population variance. Vectors with std < 1e-8 become zeros.
std::vector<double> standardize(std::span<const double> values);

}  // namespace ninepatch::imageproc

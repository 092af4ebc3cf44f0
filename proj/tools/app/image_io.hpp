#pragma once

#include "ninepatch/imageproc.hpp"

#include <string>

namespace ninepatch::app {

/// Decodes an 8-bit PNG, JPEG or binary PGM/PPM file (chosen by content, not
/// extension) and returns its luminance in [0, 1]. Colour images go through
/// to_grayscale. Throws DataError when the file cannot be decoded.
imageproc::GrayImage read_gray_image(const std::string& path);

/// 8-bit grayscale PNG; values are clamped to [0, 1] and rounded.
void write_png(const std::string& path, const imageproc::GrayImage& img);

/// Binary (P5) PGM.
void write_pgm(const std::string& path, const imageproc::GrayImage& img);

}  // namespace ninepatch::app

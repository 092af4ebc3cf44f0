#pragma once

#include "ninepatch/imageproc.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace ninepatch::patchgen {

using imageproc::BinaryMask;
using imageproc::GrayImage;

/// Square-or-rectangular sliding window grid. overlap is the fraction shared
/// by adjacent windows, in [0, 1).
struct GridSpec {
    int patch_h = 30;
    int patch_w = 30;
    double overlap = 0.5;
};

/// A standardized training/inference unit cut from one image.
struct Patch {
    std::vector<double> features;
    std::string image_id;
    /// 1-based row-major window index for grid and row patches; 0 for edge patches.
    int slot = 0;
    /// Window origin in the source image. Edge patches are centred at
    /// (top + height / 2, left + width / 2).
    int top = 0;
    int left = 0;
    int height = 0;
    int width = 0;
    /// Class index for the task at hand, -1 when unlabeled.
    int label = -1;
};

/// Window origins along one axis. The first is 0, the last is side - patch,
/// and the count is ceil((side - patch) / stride) + 1 where
/// stride = round(patch * (1 - overlap)); origins are evenly spaced and
/// rounded to integers.
std::vector<int> window_offsets(int side, int patch, double overlap);

/// The nine-patch grid and its generalizations. Patches are row-major with
/// slots 1..n. For a 60x60 image with 30x30 windows and overlap 0.5 this
/// yields the 9 windows at origins {0, 15, 30}^2.
std::vector<Patch> grid_patches(const GrayImage& img, const GridSpec& spec, const std::string& image_id = {});

/// One patch_side x patch_side patch centred on every set mask pixel whose
/// window lies fully inside the image, in row-major order of the centres.
std::vector<Patch> edge_patches(const GrayImage& img, const BinaryMask& mask, int patch_side,
                                const std::string& image_id = {});

/// n_rows full-width strips of height row_h at uniform vertical stride
/// (height - row_h) / (n_rows - 1), which must be a non-negative integer.
std::vector<Patch> row_patches(const GrayImage& img, int n_rows, int row_h, const std::string& image_id = {});

/// Resize to side x side, flatten row-major, standardize. Slot 1.
Patch whole_image_vector(const GrayImage& img, int side, const std::string& image_id = {});

/// Patch-dump file for one image (little-endian):
///   "NPPATCH1" | u32 id_len | id bytes | u32 count | u32 patch_h | u32 patch_w
///   then per patch: i32 slot | i32 top | i32 left | patch_h*patch_w f64 features
/// All patches in one dump must share dimensions.
void write_patch_dump(std::ostream& out, const std::string& image_id, const std::vector<Patch>& patches);
std::vector<Patch> read_patch_dump(std::istream& in);

}  // namespace ninepatch::patchgen

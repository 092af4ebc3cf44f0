#include "ninepatch/patchgen.hpp"

#include "detail/binary_io.hpp"
#include "ninepatch/error.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace ninepatch::patchgen {

namespace {

Patch cut(const GrayImage& img, int top, int left, int h, int w, int slot, const std::string& id) {
    std::vector<double> raw(static_cast<std::size_t>(h) * w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            raw[static_cast<std::size_t>(r) * w + c] = img.at(top + r, left + c);
        }
    }
    Patch p;
    p.features = imageproc::standardize(raw);
    p.image_id = id;
    p.slot = slot;
    p.top = top;
    p.left = left;
    p.height = h;
    p.width = w;
    return p;
}

}  // namespace

std::vector<int> window_offsets(int side, int patch, double overlap) {
    if (patch < 1 || patch > side) {
        throw InvalidInput("window of " + std::to_string(patch) + " px does not fit in " + std::to_string(side) +
                           " px");
    }
    if (!(overlap >= 0.0 && overlap < 1.0)) {
        throw InvalidInput("overlap must be in [0, 1)");
    }
    const long stride = std::lround(patch * (1.0 - overlap));
    if (stride < 1) {
        throw InvalidInput("overlap leaves a stride below one pixel");
    }
    const int span = side - patch;
    if (span == 0) return {0};

    const long steps = (span + stride - 1) / stride;
    std::vector<int> offsets;
    offsets.reserve(static_cast<std::size_t>(steps) + 1);
    for (long i = 0; i <= steps; ++i) {
        offsets.push_back(static_cast<int>(std::lround(static_cast<double>(i) * span / steps)));
    }
    return offsets;
}

std::vector<Patch> grid_patches(const GrayImage& img, const GridSpec& spec, const std::string& image_id) {
    if (img.empty()) throw InvalidInput("grid_patches: empty image");
    if (spec.patch_h > img.height || spec.patch_w > img.width) {
        throw InvalidInput("grid_patches: patch larger than image");
    }
    const auto rows = window_offsets(img.height, spec.patch_h, spec.overlap);
    const auto cols = window_offsets(img.width, spec.patch_w, spec.overlap);

    std::vector<Patch> out;
    out.reserve(rows.size() * cols.size());
    int slot = 1;
    for (int top : rows) {
        for (int left : cols) {
            out.push_back(cut(img, top, left, spec.patch_h, spec.patch_w, slot++, image_id));
        }
    }
    return out;
}

std::vector<Patch> edge_patches(const GrayImage& img, const BinaryMask& mask, int patch_side,
                                const std::string& image_id) {
    if (patch_side < 1 || patch_side % 2 == 0) {
        throw InvalidInput("edge_patches: patch side must be odd");
    }
    if (mask.width != img.width || mask.height != img.height) {
        throw InvalidInput("edge_patches: mask and image dimensions differ");
    }
    const int half = patch_side / 2;
    std::vector<Patch> out;
    for (int r = half; r + half < img.height; ++r) {
        for (int c = half; c + half < img.width; ++c) {
            if (mask.at(r, c)) {
                out.push_back(cut(img, r - half, c - half, patch_side, patch_side, 0, image_id));
            }
        }
    }
    return out;
}

std::vector<Patch> row_patches(const GrayImage& img, int n_rows, int row_h, const std::string& image_id) {
    if (img.empty()) throw InvalidInput("row_patches: empty image");
    if (n_rows < 1 || row_h < 1 || row_h > img.height) {
        throw InvalidInput("row_patches: rows do not fit in image");
    }
    int stride = 0;
    if (n_rows > 1) {
        const int span = img.height - row_h;
        if (span % (n_rows - 1) != 0) {
            throw InvalidInput("row_patches: (height - row_h) / (n_rows - 1) is not an integer");
        }
        stride = span / (n_rows - 1);
    }
    std::vector<Patch> out;
    out.reserve(static_cast<std::size_t>(n_rows));
    for (int i = 0; i < n_rows; ++i) {
        out.push_back(cut(img, i * stride, 0, row_h, img.width, i + 1, image_id));
    }
    return out;
}

Patch whole_image_vector(const GrayImage& img, int side, const std::string& image_id) {
    const GrayImage resized = imageproc::resize_bilinear(img, side, side);
    return cut(resized, 0, 0, side, side, 1, image_id);
}

namespace {
constexpr char kDumpMagic[8] = {'N', 'P', 'P', 'A', 'T', 'C', 'H', '1'};
}

void write_patch_dump(std::ostream& out, const std::string& image_id, const std::vector<Patch>& patches) {
    const int h = patches.empty() ? 0 : patches.front().height;
    const int w = patches.empty() ? 0 : patches.front().width;
    for (const auto& p : patches) {
        if (p.height != h || p.width != w || p.features.size() != static_cast<std::size_t>(h) * w) {
            throw InvalidInput("write_patch_dump: patches must share dimensions");
        }
    }
    out.write(kDumpMagic, sizeof kDumpMagic);
    detail::put_string(out, image_id);
    detail::put_u32(out, static_cast<std::uint32_t>(patches.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(h));
    detail::put_u32(out, static_cast<std::uint32_t>(w));
    for (const auto& p : patches) {
        detail::put_i32(out, p.slot);
        detail::put_i32(out, p.top);
        detail::put_i32(out, p.left);
        for (double v : p.features) detail::put_f64(out, v);
    }
}

std::vector<Patch> read_patch_dump(std::istream& in) {
    char magic[8];
    detail::read_exact(in, magic, sizeof magic);
    if (std::memcmp(magic, kDumpMagic, sizeof magic) != 0) {
        throw DataError("not a patch dump (bad magic)");
    }
    const std::string id = detail::get_string(in);
    const std::uint32_t count = detail::get_u32(in);
    const std::uint32_t h = detail::get_u32(in);
    const std::uint32_t w = detail::get_u32(in);
    if (static_cast<std::uint64_t>(h) * w > (1u << 24)) throw DataError("patch dimensions implausibly large");

    std::vector<Patch> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Patch p;
        p.image_id = id;
        p.height = static_cast<int>(h);
        p.width = static_cast<int>(w);
        p.slot = detail::get_i32(in);
        p.top = detail::get_i32(in);
        p.left = detail::get_i32(in);
        p.features.resize(static_cast<std::size_t>(h) * w);
        for (double& v : p.features) v = detail::get_f64(in);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace ninepatch::patchgen

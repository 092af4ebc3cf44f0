#include "image_io.hpp"

#include "ninepatch/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>
#include <vector>

// jpeglib.h expects FILE and size_t to be declared first.
#include <jpeglib.h>

namespace ninepatch::app {

namespace {

using imageproc::GrayImage;
using imageproc::RgbImage;

std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

GrayImage from_bytes(const unsigned char* px, int w, int h, int channels) {
    if (channels == 1) {
        GrayImage g(w, h);
        for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = px[i] / 255.0;
        return g;
    }
    RgbImage rgb(w, h);
    for (std::size_t i = 0; i < rgb.data.size(); ++i) rgb.data[i] = px[i] / 255.0;
    return imageproc::to_grayscale(rgb);
}

GrayImage decode_png(const std::vector<unsigned char>& bytes, const std::string& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw DataError("cannot decode PNG '" + path + "': " + image.message);
    }
    const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
    image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::vector<unsigned char> px(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw DataError("cannot decode PNG '" + path + "': " + msg);
    }
    return from_bytes(px.data(), static_cast<int>(image.width), static_cast<int>(image.height), gray ? 1 : 3);
}

struct JpegError {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr info) {
    auto* err = reinterpret_cast<JpegError*>(info->err);
    (*info->err->format_message)(info, err->message);
    std::longjmp(err->jump, 1);
}

GrayImage decode_jpeg(const std::vector<unsigned char>& bytes, const std::string& path) {
    jpeg_decompress_struct info;
    JpegError err;
    info.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_exit;
    std::vector<unsigned char> px;
    int w = 0, h = 0, channels = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&info);
        throw DataError("cannot decode JPEG '" + path + "': " + err.message);
    }
    jpeg_create_decompress(&info);
    jpeg_mem_src(&info, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&info, TRUE);
    info.out_color_space = info.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&info);
    w = static_cast<int>(info.output_width);
    h = static_cast<int>(info.output_height);
    channels = info.output_components;
    px.resize(static_cast<std::size_t>(w) * h * channels);
    while (info.output_scanline < info.output_height) {
        JSAMPROW row = px.data() + static_cast<std::size_t>(info.output_scanline) * w * channels;
        jpeg_read_scanlines(&info, &row, 1);
    }
    jpeg_finish_decompress(&info);
    jpeg_destroy_decompress(&info);
    return from_bytes(px.data(), w, h, channels);
}

GrayImage decode_pnm(const std::vector<unsigned char>& bytes, const std::string& path) {
    const bool color = bytes[1] == '6';
    std::size_t pos = 2;
    auto next_int = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        long v = 0;
        const std::size_t start = pos;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
        if (pos == start || v > (1L << 20)) throw DataError("malformed PNM header in '" + path + "'");
        return static_cast<int>(v);
    };
    const int w = next_int();
    const int h = next_int();
    const int maxval = next_int();
    if (maxval != 255) throw DataError("only 8-bit PNM is supported ('" + path + "')");
    ++pos;  // single whitespace before the raster
    const int channels = color ? 3 : 1;
    const std::size_t need = static_cast<std::size_t>(w) * h * channels;
    if (bytes.size() < pos + need) throw DataError("truncated PNM '" + path + "'");
    return from_bytes(bytes.data() + pos, w, h, channels);
}

std::vector<unsigned char> to_bytes(const GrayImage& img) {
    std::vector<unsigned char> px(img.data.size());
    for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = static_cast<unsigned char>(std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0));
    }
    return px;
}

}  // namespace

GrayImage read_gray_image(const std::string& path) {
    const auto bytes = slurp(path);
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes, path);
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return decode_jpeg(bytes, path);
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) return decode_pnm(bytes, path);
    throw DataError("unsupported image format '" + path + "'");
}

void write_png(const std::string& path, const GrayImage& img) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = PNG_FORMAT_GRAY;
    const auto px = to_bytes(img);
    if (!png_image_write_to_file(&image, path.c_str(), 0, px.data(), 0, nullptr)) {
        throw DataError("cannot write PNG '" + path + "': " + image.message);
    }
}

void write_pgm(const std::string& path, const GrayImage& img) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    const auto px = to_bytes(img);
    out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (!out) throw DataError("failed to write '" + path + "'");
}

}  // namespace ninepatch::app

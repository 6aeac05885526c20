#include "gda/core/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace gda {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

} // namespace

Image load_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    check(f != nullptr, "png: cannot open: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    check(png != nullptr, "png: read struct alloc failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail("png: info struct alloc failed");
    }
    std::vector<png_bytep> rows;
    std::vector<unsigned char> buf;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("png: decode error in " + path);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    buf.resize(static_cast<size_t>(w) * h * 3);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(3, static_cast<int>(h), static_cast<int>(w));
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < 3; ++ch)
                img.at(ch, y, x) = buf[(static_cast<size_t>(y) * w + x) * 3 + ch] / 255.0f;
    return img;
}

void save_png(const std::string& path, const Image& img) {
    check(img.c == 3 && img.h > 0 && img.w > 0, "png: expect non-empty 3-channel image");
    FilePtr f(std::fopen(path.c_str(), "wb"));
    check(f != nullptr, "png: cannot open for write: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    check(png != nullptr, "png: write struct alloc failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail("png: info struct alloc failed");
    }
    std::vector<unsigned char> buf(static_cast<size_t>(img.h) * img.w * 3);
    std::vector<png_bytep> rows(static_cast<size_t>(img.h));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("png: encode error for " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < 3; ++ch)
                buf[(static_cast<size_t>(y) * img.w + x) * 3 + ch] = static_cast<unsigned char>(
                    std::lround(clamp01(img.at(ch, y, x)) * 255.0f));
    for (int y = 0; y < img.h; ++y) rows[static_cast<size_t>(y)] = buf.data() + static_cast<size_t>(y) * img.w * 3;
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void quantize_u8(Image& img) {
    for (auto& v : img.px)
        v = static_cast<float>(std::lround(clamp01(v) * 255.0f)) / 255.0f;
}

Image tensor_slice_to_image(const Tensor& batch, int index) {
    check(batch.rank() == 4, "tensor_slice_to_image: expect NCHW");
    const int c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
    Image img(c, h, w);
    const int64_t per = static_cast<int64_t>(c) * h * w;
    const float* src = batch.data() + per * index;
    std::copy(src, src + per, img.px.data());
    return img;
}

void image_into_tensor(const Image& img, Tensor& batch, int index) {
    check(batch.rank() == 4 && batch.dim(1) == img.c && batch.dim(2) == img.h && batch.dim(3) == img.w,
          "image_into_tensor: shape mismatch");
    const int64_t per = static_cast<int64_t>(img.c) * img.h * img.w;
    std::copy(img.px.begin(), img.px.end(), batch.data() + per * index);
}

} // namespace gda

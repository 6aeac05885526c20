#pragma once

#include <string>
#include <vector>

#include "gda/core/tensor.hpp"

namespace gda {

// One image in CHW float layout, values in [0,1].
struct Image {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<float> px;

    Image() = default;
    Image(int c_, int h_, int w_) : c(c_), h(h_), w(w_), px(static_cast<size_t>(c_) * h_ * w_, 0.0f) {}

    float& at(int ch, int y, int x) { return px[(static_cast<size_t>(ch) * h + y) * w + x]; }
    float at(int ch, int y, int x) const { return px[(static_cast<size_t>(ch) * h + y) * w + x]; }
};

// Lossless 8-bit PNG round trip. Lossy formats would perturb the
// low-amplitude generator traces this pipeline depends on.
Image load_png(const std::string& path);
void save_png(const std::string& path, const Image& img);

// Quantize to the 8-bit grid the PNG writer uses. Applied before digesting
// sampled batches so in-memory and on-disk pixels agree.
void quantize_u8(Image& img);

Image tensor_slice_to_image(const Tensor& batch, int index);
void image_into_tensor(const Image& img, Tensor& batch, int index);

} // namespace gda

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tpg/common.hpp"

namespace tpg {

// Planar float image, CHW layout, values nominally in [0,1].
struct ImageF {
    int channels = 0, height = 0, width = 0;
    std::vector<float> data;

    ImageF() = default;
    ImageF(int c, int h, int w, float fill = 0.f)
        : channels(c), height(h), width(w), data(static_cast<size_t>(c) * h * w, fill) {}

    float& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * height + y) * width + x]; }
    float at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    size_t plane() const { return static_cast<size_t>(height) * width; }
};

// Interleaved 8-bit image (HWC), as stored in PNG files.
struct ImageU8 {
    int channels = 0, height = 0, width = 0;
    std::vector<uint8_t> data;
};

ImageU8 to_u8(const ImageF& img);
ImageF to_float(const ImageU8& img);

void write_png(const std::string& path, const ImageU8& img);
ImageU8 read_png(const std::string& path);

// Depth maps: 16-byte header (magic "DPTH", version, H, W), then H*W f32 LE.
void write_depth(const std::string& path, const std::vector<float>& depth, int h, int w);
std::vector<float> read_depth(const std::string& path, int* h, int* w);

// Area-average downscale by an integer factor.
ImageF downscale(const ImageF& img, int factor);
// Bilinear resize to (h, w).
ImageF resize_bilinear(const ImageF& img, int h, int w);

}  // namespace tpg

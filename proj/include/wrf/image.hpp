#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wrf/tensor.hpp"

namespace wrf {

// Interleaved 8-bit image; channels is 3 (PPM) or 1 (PGM).
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<uint8_t> pixels;

    uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
};

ImageU8 read_ppm(const std::string& path);
void write_ppm(const std::string& path, const ImageU8& img);
ImageU8 read_pgm(const std::string& path);
void write_pgm(const std::string& path, const ImageU8& img);

// Scale to [0,1], bilinearly resize to target_size x target_size, then
// normalize with ImageNet statistics. Result shape (1,3,S,S).
Tensor preprocess_image(const ImageU8& img, int target_size);

// argmax over class logits (N=1,C,H,W), emitted as 0 / 255.
ImageU8 mask_from_logits(const Tensor& seg_logits);

inline constexpr float kNormMean[3] = {0.485f, 0.456f, 0.406f};
inline constexpr float kNormStd[3] = {0.229f, 0.224f, 0.225f};

}  // namespace wrf

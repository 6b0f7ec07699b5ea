#include "wrf/image.hpp"

#include <fstream>

#include "wrf/ops.hpp"

namespace wrf {

namespace {

// PNM header token, skipping whitespace and '#' comment lines
std::string next_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

ImageU8 read_pnm(const std::string& path, const char* magic, int channels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("image: cannot open '" + path + "'");
    const std::string m = next_token(in);
    if (m != magic)
        throw Error("image: '" + path + "' has magic '" + m + "', expected " + magic);
    const std::string ws = next_token(in), hs = next_token(in), maxs = next_token(in);
    if (ws.empty() || hs.empty() || maxs.empty()) throw Error("image: truncated header in '" + path + "'");
    ImageU8 img;
    try {
        img.width = std::stoi(ws);
        img.height = std::stoi(hs);
    } catch (...) {
        throw Error("image: malformed dimensions in '" + path + "'");
    }
    if (img.width <= 0 || img.height <= 0)
        throw Error("image: non-positive dimensions in '" + path + "'");
    if (maxs != "255") throw Error("image: only maxval 255 supported, got '" + maxs + "'");
    img.channels = channels;
    const size_t count = static_cast<size_t>(img.width) * img.height * channels;
    img.pixels.resize(count);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(count));
    if (static_cast<size_t>(in.gcount()) != count)
        throw Error("image: truncated payload in '" + path + "'");
    return img;
}

void write_pnm(const std::string& path, const ImageU8& img, const char* magic, int channels) {
    if (img.channels != channels)
        throw Error("image: expected " + std::to_string(channels) + "-channel image for " + magic);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("image: cannot write '" + path + "'");
    out << magic << "\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw Error("image: write failed for '" + path + "'");
}

}  // namespace

ImageU8 read_ppm(const std::string& path) { return read_pnm(path, "P6", 3); }
void write_ppm(const std::string& path, const ImageU8& img) { write_pnm(path, img, "P6", 3); }
ImageU8 read_pgm(const std::string& path) { return read_pnm(path, "P5", 1); }
void write_pgm(const std::string& path, const ImageU8& img) { write_pnm(path, img, "P5", 1); }

Tensor preprocess_image(const ImageU8& img, int target_size) {
    if (img.channels != 3) throw Error("preprocess: expected RGB image");
    Tensor planes({1, 3, img.height, img.width});
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c)
                planes.at(0, c, y, x) = static_cast<float>(img.at(y, x, c)) / 255.0f;
    Tensor resized = bilinear_resize(planes, target_size, target_size);
    for (int c = 0; c < 3; ++c) {
        const float mean = kNormMean[c], inv_std = 1.0f / kNormStd[c];
        for (int y = 0; y < target_size; ++y)
            for (int x = 0; x < target_size; ++x)
                resized.at(0, c, y, x) = (resized.at(0, c, y, x) - mean) * inv_std;
    }
    return resized;
}

ImageU8 mask_from_logits(const Tensor& seg_logits) {
    if (seg_logits.rank() != 4 || seg_logits.size(0) != 1)
        throw Error("mask: expected (1,C,H,W) logits, got " + shape_str(seg_logits.shape()));
    const int classes = seg_logits.size(1), h = seg_logits.size(2), w = seg_logits.size(3);
    ImageU8 img;
    img.width = w;
    img.height = h;
    img.channels = 1;
    img.pixels.resize(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int best = 0;
            float best_v = seg_logits.at(0, 0, y, x);
            for (int c = 1; c < classes; ++c) {
                const float v = seg_logits.at(0, c, y, x);
                if (v > best_v) {
                    best_v = v;
                    best = c;
                }
            }
            img.pixels[static_cast<size_t>(y) * w + x] = best ? 255 : 0;
        }
    return img;
}

}  // namespace wrf

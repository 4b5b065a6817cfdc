#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace matclip {

// 8-bit RGB raster, row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // 3 bytes per pixel

    Image() = default;
    Image(int w, int h);

    const std::uint8_t* px(int x, int y) const {
        return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }
    std::uint8_t* px(int x, int y) {
        return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }
};

// Binary inclusion mask. Loaded masks threshold at > 0.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;  // 0 or 1

    Mask() = default;
    Mask(int w, int h);

    bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    std::size_t count_set() const;
};

// Binary PPM (P6, maxval 255).
Image read_ppm(const std::string& path);
void write_ppm(const Image& img, const std::string& path);

// Binary PGM (P5, maxval 255); any pixel > 0 is inside the mask.
Mask read_pgm_mask(const std::string& path);
void write_pgm_mask(const Mask& mask, const std::string& path);

}  // namespace matclip

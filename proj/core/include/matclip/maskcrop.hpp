#pragma once

#include "matclip/image.hpp"

namespace matclip {

struct Rect {
    int x = 0;  // left column
    int y = 0;  // top row
    int w = 0;
    int h = 0;

    long long area() const { return static_cast<long long>(w) * h; }
    bool operator==(const Rect&) const = default;
};

// Largest axis-aligned rectangle of set bits. Ties broken by smallest y,
// then smallest x, then largest w. O(H*W) histogram-of-heights sweep with a
// monotonic stack.
Rect largest_inscribed_rectangle(const Mask& mask);

Image crop(const Image& image, const Rect& rect);

}  // namespace matclip

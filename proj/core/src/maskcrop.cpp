#include "matclip/maskcrop.hpp"

#include <cstring>
#include <vector>

#include "matclip/errors.hpp"

namespace matclip {

namespace {

// area desc, then y asc, then x asc, then w desc
bool better(const Rect& a, const Rect& b) {
    if (a.area() != b.area()) return a.area() > b.area();
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.w > b.w;
}

}  // namespace

Rect largest_inscribed_rectangle(const Mask& mask) {
    const int w = mask.width, h = mask.height;
    std::vector<int> heights(static_cast<std::size_t>(w), 0);
    std::vector<int> stack;
    stack.reserve(static_cast<std::size_t>(w) + 1);

    Rect best{0, 0, 0, 0};
    bool found = false;

    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c)
            heights[c] = mask.at(c, r) ? heights[c] + 1 : 0;

        // Sweep with a sentinel column of height -1 so every bar pops.
        stack.clear();
        for (int c = 0; c <= w; ++c) {
            const int cur = (c < w) ? heights[c] : -1;
            while (!stack.empty() && heights[stack.back()] > cur) {
                const int bar = stack.back();
                stack.pop_back();
                const int height = heights[bar];
                if (height == 0) continue;
                const int left = stack.empty() ? 0 : stack.back() + 1;
                Rect cand{left, r - height + 1, c - left, height};
                if (!found || better(cand, best)) {
                    best = cand;
                    found = true;
                }
            }
            stack.push_back(c);
        }
    }

    if (!found) throw EmptyMask("mask has no set bits");
    return best;
}

Image crop(const Image& image, const Rect& rect) {
    if (rect.w < 1 || rect.h < 1 || rect.x < 0 || rect.y < 0 ||
        rect.x + rect.w > image.width || rect.y + rect.h > image.height)
        throw OutOfBounds("crop rectangle outside image bounds");
    Image out(rect.w, rect.h);
    for (int y = 0; y < rect.h; ++y) {
        std::memcpy(out.px(0, y), image.px(rect.x, rect.y + y),
                    3 * static_cast<std::size_t>(rect.w));
    }
    return out;
}

}  // namespace matclip

#pragma once

#include <vector>

#include "matclip/image.hpp"

namespace matclip {

using Descriptor = std::vector<float>;

inline constexpr int kHistogramBins = 1000;

// Uniform 10x10x10 RGB grid: bin = 100*floor(r*10/256) + 10*floor(g*10/256) + floor(b*10/256).
int quantize_color(std::uint8_t r, std::uint8_t g, std::uint8_t b);

// Normalized 1000-bin color histogram over the masked pixels.
Descriptor color_histogram(const Image& image, const Mask& mask);

Descriptor l2_normalize(const Descriptor& v);

// Clamped to [-1, 1] so rank comparisons never see floating-point overshoot.
float cosine_sim(const Descriptor& a, const Descriptor& b);

// Concatenation of w_i * l2_normalize(part_i), re-normalized as a whole.
Descriptor concat_descriptors(const std::vector<Descriptor>& parts,
                              const std::vector<float>& weights);

}  // namespace matclip

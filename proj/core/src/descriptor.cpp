#include "matclip/descriptor.hpp"

#include <algorithm>
#include <cmath>

#include "matclip/errors.hpp"

namespace matclip {

int quantize_color(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int qr = (r * 10) / 256;
    const int qg = (g * 10) / 256;
    const int qb = (b * 10) / 256;
    return 100 * qr + 10 * qg + qb;
}

Descriptor color_histogram(const Image& image, const Mask& mask) {
    if (image.width != mask.width || image.height != mask.height)
        throw DimensionMismatch("image and mask dimensions differ");
    Descriptor hist(kHistogramBins, 0.0f);
    std::size_t n = 0;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (!mask.at(x, y)) continue;
            const std::uint8_t* p = image.px(x, y);
            hist[quantize_color(p[0], p[1], p[2])] += 1.0f;
            ++n;
        }
    }
    if (n == 0) throw EmptyMask("mask has no set bits");
    const float inv = 1.0f / static_cast<float>(n);
    for (auto& v : hist) v *= inv;
    return hist;
}

Descriptor l2_normalize(const Descriptor& v) {
    double ss = 0.0;
    for (float x : v) ss += static_cast<double>(x) * x;
    const double norm = std::sqrt(ss);
    if (norm <= 1e-12) throw ZeroVector("cannot normalize a (near-)zero vector");
    Descriptor out(v.size());
    const float inv = static_cast<float>(1.0 / norm);
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * inv;
    return out;
}

float cosine_sim(const Descriptor& a, const Descriptor& b) {
    if (a.size() != b.size())
        throw DimensionMismatch("cosine_sim operands have different lengths");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na <= 1e-24 || nb <= 1e-24) throw ZeroVector("cosine_sim of a zero vector");
    const double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return static_cast<float>(std::clamp(c, -1.0, 1.0));
}

Descriptor concat_descriptors(const std::vector<Descriptor>& parts,
                              const std::vector<float>& weights) {
    if (parts.empty()) throw DimensionMismatch("concat_descriptors: no parts");
    if (parts.size() != weights.size())
        throw DimensionMismatch("concat_descriptors: weights length mismatch");
    bool any_positive = false;
    for (float w : weights) {
        if (w < 0.0f) throw DimensionMismatch("concat_descriptors: negative weight");
        any_positive |= w > 0.0f;
    }
    if (!any_positive) throw ZeroVector("concat_descriptors: all weights zero");

    Descriptor out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        Descriptor u = l2_normalize(parts[i]);  // ZeroVector propagates
        for (float x : u) out.push_back(weights[i] * x);
    }
    return l2_normalize(out);
}

}  // namespace matclip

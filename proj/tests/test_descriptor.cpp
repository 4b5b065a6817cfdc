#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "common.hpp"
#include "matclip/descriptor.hpp"
#include "matclip/errors.hpp"

using namespace matclip;

TEST_SUITE_BEGIN("descriptor");

TEST_CASE("quantize_color corner and hand-evaluated bins") {
    CHECK(quantize_color(0, 0, 0) == 0);
    CHECK(quantize_color(255, 255, 255) == 999);  // floor(255*10/256) = 9 per channel
    CHECK(quantize_color(128, 0, 0) == 500);      // floor(128*10/256) = 5
}

TEST_CASE("quantize_color is total and surjective onto 0..999") {
    // channel value 26*q lands in cell q for every q in 0..9
    std::set<int> bins;
    for (int qr = 0; qr < 10; ++qr)
        for (int qg = 0; qg < 10; ++qg)
            for (int qb = 0; qb < 10; ++qb)
                bins.insert(quantize_color(static_cast<std::uint8_t>(26 * qr),
                                           static_cast<std::uint8_t>(26 * qg),
                                           static_cast<std::uint8_t>(26 * qb)));
    CHECK(bins.size() == 1000);
    CHECK(*bins.begin() == 0);
    CHECK(*bins.rbegin() == 999);

    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const auto r = static_cast<std::uint8_t>(rng.next_below(256));
        const auto g = static_cast<std::uint8_t>(rng.next_below(256));
        const auto b = static_cast<std::uint8_t>(rng.next_below(256));
        const int bin = quantize_color(r, g, b);
        CHECK(bin >= 0);
        CHECK(bin <= 999);
        CHECK(bin == 100 * (r * 10 / 256) + 10 * (g * 10 / 256) + (b * 10 / 256));
    }
}

namespace {

Image uniform_image(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    Image img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            auto* p = img.px(x, y);
            p[0] = r;
            p[1] = g;
            p[2] = b;
        }
    return img;
}

Mask full_mask(int w, int h) {
    Mask m(w, h);
    std::fill(m.bits.begin(), m.bits.end(), 1);
    return m;
}

}  // namespace

TEST_CASE("color_histogram single-color fixture") {
    const Image img = uniform_image(4, 3, 255, 0, 0);
    const Descriptor hist = color_histogram(img, full_mask(4, 3));
    CHECK(hist.size() == 1000);
    CHECK(hist[900] == doctest::Approx(1.0));
    double sum = 0.0;
    for (float v : hist) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("color_histogram errors") {
    const Image img = uniform_image(4, 3, 10, 10, 10);
    CHECK_THROWS_AS(color_histogram(img, Mask(4, 3)), EmptyMask);
    CHECK_THROWS_AS(color_histogram(img, full_mask(5, 3)), DimensionMismatch);
}

TEST_CASE("color_histogram two-pixel count-and-normalize oracle") {
    Image img(2, 1);
    auto* p0 = img.px(0, 0);
    p0[0] = p0[1] = p0[2] = 0;
    auto* p1 = img.px(1, 0);
    p1[0] = p1[1] = p1[2] = 255;
    const Descriptor hist = color_histogram(img, full_mask(2, 1));
    CHECK(hist[0] == doctest::Approx(0.5));
    CHECK(hist[999] == doctest::Approx(0.5));
}

TEST_CASE("color_histogram is permutation-invariant over masked pixel order") {
    Rng rng(11);
    Image img(8, 8);
    Mask mask(8, 8);
    for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng.next_below(256));
    for (auto& b : mask.bits) b = rng.next_below(2) ? 1 : 0;
    mask.bits[0] = 1;

    // permute the pixel values among masked positions
    std::vector<std::size_t> masked;
    for (std::size_t i = 0; i < mask.bits.size(); ++i)
        if (mask.bits[i]) masked.push_back(i);
    Image shuffled = img;
    for (std::size_t i = masked.size(); i > 1; --i) {
        const std::size_t j = rng.next_below(i);
        for (int c = 0; c < 3; ++c)
            std::swap(shuffled.pixels[3 * masked[i - 1] + c], shuffled.pixels[3 * masked[j] + c]);
    }

    CHECK(color_histogram(img, mask) == color_histogram(shuffled, mask));
}

TEST_CASE("l2_normalize fixtures") {
    const Descriptor out = l2_normalize({3.0f, 4.0f});
    CHECK(out[0] == doctest::Approx(0.6));
    CHECK(out[1] == doctest::Approx(0.8));

    const Descriptor unit = l2_normalize({1.0f, 0.0f});
    CHECK(unit[0] == doctest::Approx(1.0));

    CHECK_THROWS_AS(l2_normalize({0.0f, 0.0f}), ZeroVector);
}

TEST_CASE("cosine_sim fixtures and properties") {
    const Descriptor a{1.0f, 2.0f, -0.5f};
    CHECK(cosine_sim(a, a) == doctest::Approx(1.0));
    CHECK(cosine_sim({1, 0}, {0, 1}) == doctest::Approx(0.0));
    CHECK(cosine_sim({1, 1}, {1, 0}) == doctest::Approx(0.7071).epsilon(1e-4));
    CHECK_THROWS_AS(cosine_sim({0, 0}, {1, 0}), ZeroVector);

    Rng rng(13);
    for (int i = 0; i < 50; ++i) {
        const auto u = testutil::random_unit_vec(rng, 8);
        const auto v = testutil::random_unit_vec(rng, 8);
        const float c = cosine_sim(u, v);
        CHECK(c >= -1.0f);
        CHECK(c <= 1.0f);
        CHECK(cosine_sim(v, u) == doctest::Approx(c));
        Descriptor scaled = u;
        const float factor = static_cast<float>(0.1 + 5.0 * rng.next_double());
        for (auto& x : scaled) x *= factor;
        CHECK(cosine_sim(scaled, v) == doctest::Approx(c).epsilon(1e-5));
    }
}

TEST_CASE("concat_descriptors fixtures") {
    const Descriptor part{3.0f, 4.0f};

    SUBCASE("one part, weight 1, equals l2_normalize") {
        const Descriptor out = concat_descriptors({part}, {1.0f});
        CHECK(out[0] == doctest::Approx(0.6));
        CHECK(out[1] == doctest::Approx(0.8));
    }

    SUBCASE("weight 0 zeroes that block") {
        const Descriptor out = concat_descriptors({part, {1.0f, 0.0f}}, {1.0f, 0.0f});
        CHECK(out[2] == 0.0f);
        CHECK(out[3] == 0.0f);
        CHECK(out[0] == doctest::Approx(0.6));
    }

    SUBCASE("two unit parts, equal weights, blocks scale by 1/sqrt(2)") {
        const Descriptor out = concat_descriptors({{1.0f, 0.0f}, {0.0f, 1.0f}}, {1.0f, 1.0f});
        const float inv_sqrt2 = 1.0f / std::sqrt(2.0f);
        CHECK(out[0] == doctest::Approx(inv_sqrt2));
        CHECK(out[3] == doctest::Approx(inv_sqrt2));
    }

    SUBCASE("errors") {
        CHECK_THROWS_AS(concat_descriptors({}, {}), DimensionMismatch);
        CHECK_THROWS_AS(concat_descriptors({part}, {1.0f, 2.0f}), DimensionMismatch);
        CHECK_THROWS_AS(concat_descriptors({{0.0f, 0.0f}}, {1.0f}), ZeroVector);
        CHECK_THROWS_AS(concat_descriptors({part, part}, {0.0f, 0.0f}), ZeroVector);
    }
}

TEST_CASE("concat_descriptors output is always unit norm") {
    Rng rng(17);
    for (int i = 0; i < 30; ++i) {
        const int n = 1 + static_cast<int>(rng.next_below(4));
        std::vector<Descriptor> parts;
        std::vector<float> weights;
        for (int p = 0; p < n; ++p) {
            parts.push_back(testutil::random_unit_vec(rng, 3 + static_cast<int>(rng.next_below(5))));
            weights.push_back(static_cast<float>(rng.next_double()));
        }
        weights[0] = 1.0f;  // at least one positive
        const Descriptor out = concat_descriptors(parts, weights);
        double ss = 0.0;
        for (float v : out) ss += static_cast<double>(v) * v;
        CHECK(std::sqrt(ss) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_SUITE_END();

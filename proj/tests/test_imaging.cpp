#include "puree/imaging.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <doctest.h>

#include <cmath>
#include <stdexcept>

using namespace puree::imaging;

namespace {

AcquisitionStack flat_stack(int w, int h, double normal, double dark, double white, double tau1 = 10.0,
                            double tau2 = 10.0) {
    AcquisitionStack s;
    s.normal = RawImage(w, h, normal);
    s.dark = RawImage(w, h, dark);
    s.white = RawImage(w, h, white);
    s.tau1 = tau1;
    s.tau2 = tau2;
    s.mm_per_pixel = 0.5;
    s.label = {"sp6", 1.0, 0};
    return s;
}

TransmittanceImage constant_image(int w, int h, double t) {
    TransmittanceImage img;
    img.width = w;
    img.height = h;
    img.data.assign(static_cast<std::size_t>(w) * h * kChannels, t);
    img.mask.assign(static_cast<std::size_t>(w) * h, 1);
    img.label = {"sp6", 0.6, 2};
    return img;
}

}  // namespace

TEST_CASE("normalize examples") {
    SUBCASE("normal equals white") {
        const auto t = normalize(flat_stack(8, 6, 0.7, 0.0, 0.7));
        for (double v : t.data) CHECK(v == doctest::Approx(1.0));
        CHECK(t.masked_fraction() == 0.0);
        CHECK_FALSE(t.warning);
    }
    SUBCASE("normal equals dark") {
        for (double v : normalize(flat_stack(8, 6, 0.1, 0.1, 0.9)).data) CHECK(v == 0.0);
    }
    SUBCASE("exposure correction") {
        const auto t = normalize(flat_stack(4, 4, 0.5, 0.1, 0.9, 10.0, 20.0));
        for (double v : t.data) CHECK(v == doctest::Approx(1.0));
    }
}

TEST_CASE("normalize clips, masks and warns") {
    auto s = flat_stack(10, 10, 0.9, 0.1, 0.2);
    auto t = normalize(s);
    for (double v : t.data) CHECK(v == 2.0);  // 8x, clipped to t_max

    s = flat_stack(10, 10, 0.05, 0.1, 0.9);
    for (double v : normalize(s).data) CHECK(v == 0.0);

    // Left 6 columns have no white/dark contrast.
    s = flat_stack(10, 10, 0.5, 0.1, 0.9);
    for (int y = 0; y < 10; ++y) {
        for (int x = 0; x < 6; ++x) s.white.at(x, y, 1) = 0.1;
    }
    t = normalize(s);
    CHECK(t.masked_fraction() == doctest::Approx(0.6));
    CHECK(t.warning.has_value());
    CHECK_FALSE(t.valid(0, 0));
    CHECK(t.valid(9, 9));
}

TEST_CASE("normalize rejects bad stacks") {
    auto s = flat_stack(8, 6, 0.5, 0.1, 0.9);
    s.dark = RawImage(6, 8, 0.1);
    CHECK_THROWS_AS(normalize(s), std::invalid_argument);
    s = flat_stack(8, 6, 0.5, 0.1, 0.9);
    s.tau1 = 0.0;
    CHECK_THROWS_AS(normalize(s), std::invalid_argument);
    s = flat_stack(8, 6, 0.5, 0.1, 0.9);
    CHECK_THROWS_AS(normalize(s, {0.0, 2.0}), std::invalid_argument);
    s.normal.data[3] = -1.0;
    CHECK_THROWS_AS(normalize(s), std::invalid_argument);
}

TEST_CASE("normalize is invariant to a common gain on signal and reference") {
    auto s = flat_stack(16, 8, 0.0, 0.05, 0.0);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t k = 0; k < s.normal.data.size(); ++k) {
        s.white.data[k] = 0.5 + 0.5 * u(rng);
        s.normal.data[k] = 0.05 + (s.white.data[k] - 0.05) * u(rng);
    }
    const auto base = normalize(s);
    for (double gain : {0.25, 3.0, 17.5}) {
        auto scaled = s;
        for (std::size_t k = 0; k < s.normal.data.size(); ++k) {
            scaled.normal.data[k] = s.dark.data[k] + gain * (s.normal.data[k] - s.dark.data[k]);
            scaled.white.data[k] = s.dark.data[k] + gain * (s.white.data[k] - s.dark.data[k]);
        }
        const auto t = normalize(scaled);
        for (std::size_t k = 0; k < t.data.size(); ++k) CHECK(t.data[k] == doctest::Approx(base.data[k]).epsilon(1e-12));
    }
}

TEST_CASE("center_roi") {
    auto img = constant_image(200, 200, 0.5);
    img.data[(static_cast<std::size_t>(65) * 200 + 65) * 3] = 0.9;
    const auto crop = center_roi(img, {35.0, 35.0}, 0.5);
    CHECK(crop.width == 70);
    CHECK(crop.height == 70);
    CHECK(crop.at(0, 0, 0) == 0.9);  // origin (65, 65)
    CHECK(crop.at(1, 0, 0) == 0.5);

    const auto full = center_roi(constant_image(70, 70, 0.3), {35.0, 35.0}, 0.5);
    CHECK(full.width == 70);

    // Odd slack goes to the top-left: (71 - 70) / 2 = 0.
    auto odd = constant_image(71, 71, 0.1);
    odd.data[0] = 0.7;
    CHECK(center_roi(odd, {35.0, 35.0}, 0.5).at(0, 0, 0) == 0.7);

    CHECK(center_roi(constant_image(400, 400, 0.1), {35.0, 35.0}, 0.1).width == 350);
    CHECK_THROWS_AS(center_roi(constant_image(30, 30, 0.1), {35.0, 35.0}, 0.5), std::invalid_argument);
}

TEST_CASE("extract_patches") {
    SUBCASE("constant image") {
        const auto patches = extract_patches(constant_image(60, 30, 0.25), 1, kPatchSize, 9, 1);
        REQUIRE(patches.size() == 1);
        CHECK(patches[0].pixels.size() == kPatchValues);
        for (float v : patches[0].pixels) CHECK(v == 0.25f);
        CHECK(patches[0].dilution_class == 2);
        CHECK(patches[0].flavor_id == 1);
    }
    SUBCASE("determinism") {
        const auto img = constant_image(140, 140, 0.4);
        std::mt19937_64 a(5), b(5), c(6);
        CHECK(draw_patch_origins(img, 50, kPatchSize, a) == draw_patch_origins(img, 50, kPatchSize, b));
        std::mt19937_64 a2(5);
        CHECK(draw_patch_origins(img, 50, kPatchSize, a2) != draw_patch_origins(img, 50, kPatchSize, c));
    }
    SUBCASE("bounds") {
        CHECK(extract_patches(constant_image(70, 70, 0.4), 400, kPatchSize, 1).size() == 400);
        CHECK(extract_patches(constant_image(140, 70, 0.4), 400, kPatchSize, 1).size() == 400);
        CHECK_THROWS_AS(extract_patches(constant_image(49, 70, 0.4), 1, kPatchSize, 1), std::invalid_argument);
        CHECK_THROWS_AS(extract_patches(constant_image(70, 70, 0.4), 0, kPatchSize, 1), std::invalid_argument);
    }
    SUBCASE("origins stay in bounds and skip masked pixels") {
        auto img = constant_image(150, 60, 0.4);
        for (int y = 0; y < 60; ++y) img.mask[static_cast<std::size_t>(y) * 150 + 60] = 0;
        std::mt19937_64 rng(11);
        for (const auto& o : draw_patch_origins(img, 200, kPatchSize, rng)) {
            CHECK(o.x >= 0);
            CHECK(o.y >= 0);
            CHECK(o.x + 50 <= 150);
            CHECK(o.y + 25 <= 60);
            CHECK((o.x + 50 <= 60 || o.x > 60));
        }
    }
    SUBCASE("no valid placement") {
        auto img = constant_image(60, 30, 0.4);
        img.mask[15 * 60 + 30] = 0;  // inside every placement
        CHECK_THROWS_AS(extract_patches(img, 3, kPatchSize, 1), std::runtime_error);
    }
}

TEST_CASE("patch origins are uniform over the valid origin set") {
    // 21 x 46 possible origins for a 25x50 patch in a 70x70 image.
    const auto img = constant_image(70, 70, 0.5);
    const int nx = 70 - 50 + 1;
    const int ny = 70 - 25 + 1;
    const std::size_t draws = 100000;
    std::mt19937_64 rng(2024);
    std::vector<double> counts(static_cast<std::size_t>(nx * ny), 0.0);
    for (const auto& o : draw_patch_origins(img, draws, kPatchSize, rng)) counts[static_cast<std::size_t>(o.y * nx + o.x)] += 1.0;

    const double expected = static_cast<double>(draws) / static_cast<double>(counts.size());
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    const boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
    const double critical = boost::math::quantile(dist, 1.0 - 0.001);
    CHECK(chi2 < critical);
}

TEST_CASE("transmittance_map") {
    const auto half = transmittance_map(constant_image(5, 4, 0.5), 0);
    for (double v : half.percent) CHECK(v == 50.0);
    for (double v : half.row_profile) CHECK(v == 50.0);
    for (double v : transmittance_map(constant_image(5, 4, 1.0), 2).percent) CHECK(v == 100.0);

    auto rows = constant_image(3, 2, 0.2);
    for (int x = 0; x < 3; ++x) {
        for (int c = 0; c < 3; ++c) rows.data[(3 + static_cast<std::size_t>(x)) * 3 + c] = 0.4;
    }
    const auto map = transmittance_map(rows, 1);
    CHECK(map.row_profile[0] == doctest::Approx(20.0));
    CHECK(map.row_profile[1] == doctest::Approx(40.0));

    auto partial = constant_image(2, 2, 0.3);
    partial.mask = {0, 1, 0, 0};
    const auto pm = transmittance_map(partial, 0);
    CHECK(std::isnan(pm.percent[0]));
    CHECK(pm.row_profile[0] == doctest::Approx(30.0));
    CHECK(std::isnan(pm.row_profile[1]));

    partial.mask = {0, 0, 0, 0};
    CHECK_THROWS_AS(transmittance_map(partial, 0), std::invalid_argument);
    CHECK_THROWS_AS(transmittance_map(constant_image(2, 2, 0.3), 3), std::invalid_argument);
}

#include "puree/imaging.hpp"
#include "puree/photonics.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

using namespace puree;
using namespace puree::photonics;

namespace {

OpticalMedium water_and_vita(double c_water, double c_vita) {
    return {{
        {"water", {0.010, 0.006, 0.004}, c_water, 5.0},
        {"vitamin_a", {0.036, 0.230, 0.440}, c_vita, 5.0},
    }};
}

Geometry small_geometry() { return {80, 60, 0.5}; }

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("transmittance examples") {
    CHECK(transmittance(water_and_vita(0.0, 0.0)) == Rgb3{1.0, 1.0, 1.0});

    const OpticalMedium half{{{"x", {std::log(2.0), std::log(2.0), std::log(2.0)}, 1.0, 1.0}}};
    for (double t : transmittance(half)) CHECK(t == doctest::Approx(0.5).epsilon(1e-15));

    const OpticalMedium first{{{"a", {0.3, 0.7, 1.1}, 1.0, 1.0}}};
    const OpticalMedium second{{{"b", {0.2, 0.05, 0.4}, 2.0, 1.5}}};
    OpticalMedium both = first;
    both.terms.push_back(second.terms[0]);
    const auto t1 = transmittance(first);
    const auto t2 = transmittance(second);
    const auto t12 = transmittance(both);
    for (int c = 0; c < 3; ++c) CHECK(t12[c] == doctest::Approx(t1[c] * t2[c]).epsilon(1e-14));
}

TEST_CASE("medium validation") {
    CHECK_THROWS_AS(transmittance(OpticalMedium{}), std::invalid_argument);
    CHECK_THROWS_AS(transmittance({{{"x", {-0.1, 0.0, 0.0}, 1.0, 1.0}}}), std::invalid_argument);
    CHECK_THROWS_AS(transmittance({{{"x", {0.1, 0.0, 0.0}, -1.0, 1.0}}}), std::invalid_argument);
    CHECK_THROWS_AS(transmittance({{{"x", {0.1, 0.0, 0.0}, 1.0, 0.0}}}), std::invalid_argument);
}

TEST_CASE("transmittance decreases strictly with every concentration") {
    for (double c = 0.0; c < 3.0; c += 0.25) {
        const auto lo = transmittance(water_and_vita(0.9, c));
        const auto hi = transmittance(water_and_vita(0.9, c + 0.1));
        const auto wet = transmittance(water_and_vita(c + 0.1, 1.0));
        const auto dry = transmittance(water_and_vita(c, 1.0));
        for (int ch = 0; ch < 3; ++ch) {
            CHECK(hi[ch] < lo[ch]);
            CHECK(wet[ch] < dry[ch]);
        }
    }
}

TEST_CASE("log T is linear in concentration for a single absorber") {
    for (double c : {0.1, 0.5, 1.0, 2.5}) {
        const auto once = transmittance(water_and_vita(0.0, c));
        const auto twice = transmittance(water_and_vita(0.0, 2.0 * c));
        for (int ch = 0; ch < 3; ++ch) {
            CHECK(std::log(twice[ch]) == doctest::Approx(2.0 * std::log(once[ch])).epsilon(1e-13));
        }
    }
}

TEST_CASE("dilute examples") {
    const OpticalMedium m = water_and_vita(0.9, 2.0);
    const OpticalMedium same = dilute(m, 1.0, "water");
    CHECK(same.terms[0].concentration == 0.9);
    CHECK(same.terms[1].concentration == 2.0);

    CHECK(dilute(m, 0.5, "water").terms[1].concentration == doctest::Approx(1.0));
    CHECK(dilute(m, 0.2, "water", 1.0).terms[0].concentration == doctest::Approx(0.98).epsilon(1e-15));

    CHECK_THROWS_AS(dilute(m, 0.0, "water"), std::invalid_argument);
    CHECK_THROWS_AS(dilute(m, 1.5, "water"), std::invalid_argument);
}

TEST_CASE("dilution scales the absorber exponent exactly") {
    const OpticalMedium m = water_and_vita(0.0, 1.3);
    const auto full = optical_density(m);
    for (double f : kDefaultFractions) {
        const auto diluted = optical_density(dilute(m, f, "water", 0.0));
        for (int ch = 0; ch < 3; ++ch) CHECK(diluted[ch] == doctest::Approx(f * full[ch]).epsilon(1e-14));
    }
}

TEST_CASE("dilution series validation and class indices") {
    DilutionSeries s{"sp8", water_and_vita(0.9, 1.25)};
    CHECK(dilution_classes(s) == std::vector<int>{0, 1, 2, 3, 4});
    s.fractions = {0.2, 0.6, 1.0};
    CHECK(dilution_classes(s) == std::vector<int>{2, 1, 0});
    s.fractions = {1.0, 0.6, 0.8};
    CHECK_THROWS_AS(validate(s), std::invalid_argument);
    s.fractions = {1.0, 1.0};
    CHECK_THROWS_AS(validate(s), std::invalid_argument);
    s.fractions = {1.2, 0.5};
    CHECK_THROWS_AS(validate(s), std::invalid_argument);
}

TEST_CASE("simulate_acquisition round trip and determinism") {
    const DilutionSeries series{"sp8", water_and_vita(0.9, 1.25)};
    const Illumination illum{0.9, 0.02, 0.2, 20.0, 10.0};

    SUBCASE("zero noise normalizes back to T") {
        const auto stacks = simulate_acquisition(series, small_geometry(), illum, {0.0, 1});
        const auto expected = series_transmittance(series);
        REQUIRE(stacks.size() == 5);
        for (std::size_t i = 0; i < stacks.size(); ++i) {
            const auto t = imaging::normalize(stacks[i]);
            double worst = 0.0;
            for (std::size_t k = 0; k < t.data.size(); ++k) {
                worst = std::max(worst, std::abs(t.data[k] - expected[i][k % 3]));
            }
            CHECK(worst < 1e-9);
            CHECK(stacks[i].label.dilution_class == static_cast<int>(i));
        }
    }

    SUBCASE("same seed gives identical stacks") {
        const auto a = simulate_acquisition(series, small_geometry(), illum, {0.05, 99});
        const auto b = simulate_acquisition(series, small_geometry(), illum, {0.05, 99});
        const auto c = simulate_acquisition(series, small_geometry(), illum, {0.05, 100});
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].normal.data == b[i].normal.data);
        }
        CHECK(a[0].normal.data != c[0].normal.data);
        // Stack i uses seed + i, so shifting the seed by one shifts the stacks.
        CHECK(a[1].normal.data != c[0].normal.data);
    }

    SUBCASE("diluted samples are brighter") {
        const auto stacks = simulate_acquisition(series, small_geometry(), illum, {0.01, 5});
        for (std::size_t i = 1; i < stacks.size(); ++i) {
            CHECK(mean_of(stacks[i].normal.data) > mean_of(stacks[i - 1].normal.data));
        }
    }

    SUBCASE("invalid geometry") {
        CHECK_THROWS_AS(simulate_acquisition(series, {40, 20, 0.5}, illum, {}), std::invalid_argument);
        CHECK_THROWS_AS(simulate_acquisition(series, {80, 60, 0.0}, illum, {}), std::invalid_argument);
        Illumination dim = illum;
        dim.white_level = 0.01;
        CHECK_THROWS_AS(simulate_acquisition(series, small_geometry(), dim, {}), std::invalid_argument);
        CHECK_THROWS_AS(simulate_acquisition(series, small_geometry(), illum, {-1.0, 0}), std::invalid_argument);
    }
}

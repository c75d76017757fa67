#include "puree/photonics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace puree::photonics {

void validate(const OpticalMedium& m) {
    if (m.terms.empty()) throw std::invalid_argument("optical medium has no terms");
    for (const auto& t : m.terms) {
        for (double e : t.extinction) {
            if (!(e >= 0.0) || !std::isfinite(e)) {
                throw std::invalid_argument("term '" + t.name + "': extinction must be >= 0");
            }
        }
        if (!(t.concentration >= 0.0) || !std::isfinite(t.concentration)) {
            throw std::invalid_argument("term '" + t.name + "': concentration must be >= 0");
        }
        if (!(t.path_length > 0.0) || !std::isfinite(t.path_length)) {
            throw std::invalid_argument("term '" + t.name + "': path length must be > 0");
        }
    }
}

Rgb3 optical_density(const OpticalMedium& m) {
    validate(m);
    Rgb3 od{0.0, 0.0, 0.0};
    for (const auto& t : m.terms) {
        for (int ch = 0; ch < 3; ++ch) od[ch] += t.extinction[ch] * t.concentration * t.path_length;
    }
    return od;
}

Rgb3 transmittance(const OpticalMedium& m) {
    const Rgb3 od = optical_density(m);
    return {std::exp(-od[0]), std::exp(-od[1]), std::exp(-od[2])};
}

OpticalMedium dilute(const OpticalMedium& m, double fraction, const std::string& diluent,
                     double pure_diluent_concentration) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("dilution fraction must lie in (0, 1]");
    }
    validate(m);
    OpticalMedium out = m;
    for (auto& t : out.terms) {
        if (t.name == diluent) {
            t.concentration = t.concentration * fraction + (1.0 - fraction) * pure_diluent_concentration;
        } else {
            t.concentration *= fraction;
        }
    }
    return out;
}

void validate(const DilutionSeries& s) {
    validate(s.base);
    if (s.fractions.empty()) throw std::invalid_argument("dilution series has no fractions");
    for (double f : s.fractions) {
        if (!(f > 0.0 && f <= 1.0)) {
            throw std::invalid_argument("dilution fraction must lie in (0, 1]");
        }
    }
    const bool decreasing = std::adjacent_find(s.fractions.begin(), s.fractions.end(),
                                               std::less_equal<>()) == s.fractions.end();
    const bool increasing = std::adjacent_find(s.fractions.begin(), s.fractions.end(),
                                               std::greater_equal<>()) == s.fractions.end();
    if (!decreasing && !increasing) {
        throw std::invalid_argument("dilution fractions must be strictly monotone");
    }
}

std::vector<int> dilution_classes(const DilutionSeries& s) {
    validate(s);
    std::vector<int> classes;
    classes.reserve(s.fractions.size());
    for (double f : s.fractions) {
        const auto higher = std::count_if(s.fractions.begin(), s.fractions.end(),
                                          [f](double g) { return g > f; });
        classes.push_back(static_cast<int>(higher));
    }
    return classes;
}

std::vector<Rgb3> series_transmittance(const DilutionSeries& series) {
    validate(series);
    std::vector<Rgb3> out;
    for (double f : series.fractions) {
        out.push_back(transmittance(
            dilute(series.base, f, series.diluent, series.pure_diluent_concentration)));
    }
    return out;
}

namespace {

imaging::RawImage white_frame(const Geometry& g, const Illumination& il) {
    imaging::RawImage img(g.width, g.height);
    const double cx = 0.5 * (g.width - 1);
    const double cy = 0.5 * (g.height - 1);
    const double r2max = std::max(cx * cx + cy * cy, 1.0);
    for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
            const double r2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / r2max;
            const double level = il.white_level * (1.0 - il.vignetting * r2);
            for (int c = 0; c < imaging::kChannels; ++c) img.at(x, y, c) = level;
        }
    }
    return img;
}

void check(const Geometry& g, const Illumination& il, const NoiseSpec& noise) {
    if (g.width < imaging::kPatchSize.cols || g.height < imaging::kPatchSize.rows) {
        throw std::invalid_argument("geometry smaller than one 25x50 patch");
    }
    if (!(g.mm_per_pixel > 0.0)) throw std::invalid_argument("mm_per_pixel must be > 0");
    if (!(il.tau1 > 0.0) || !(il.tau2 > 0.0)) throw std::invalid_argument("exposure times must be > 0");
    if (!(il.dark_level >= 0.0)) throw std::invalid_argument("dark level must be >= 0");
    if (!(il.vignetting >= 0.0 && il.vignetting < 1.0)) {
        throw std::invalid_argument("vignetting must lie in [0, 1)");
    }
    if (!(il.white_level * (1.0 - il.vignetting) > il.dark_level)) {
        throw std::invalid_argument("white level must exceed dark level everywhere");
    }
    if (!(noise.sigma_read >= 0.0)) throw std::invalid_argument("sigma_read must be >= 0");
}

}  // namespace

std::vector<imaging::AcquisitionStack> simulate_acquisition(const DilutionSeries& series,
                                                            const Geometry& geometry,
                                                            const Illumination& illum,
                                                            const NoiseSpec& noise) {
    validate(series);
    check(geometry, illum, noise);

    const auto classes = dilution_classes(series);
    const auto transmittances = series_transmittance(series);
    const imaging::RawImage white = white_frame(geometry, illum);
    const imaging::RawImage dark(geometry.width, geometry.height, illum.dark_level);
    const double exposure_ratio = illum.tau1 / illum.tau2;

    std::vector<imaging::AcquisitionStack> stacks;
    stacks.reserve(series.fractions.size());
    for (std::size_t i = 0; i < series.fractions.size(); ++i) {
        std::mt19937_64 rng(noise.seed + i);
        std::normal_distribution<double> read_noise(0.0, 1.0);
        const Rgb3& t = transmittances[i];

        imaging::AcquisitionStack s;
        s.dark = dark;
        s.white = white;
        s.normal = imaging::RawImage(geometry.width, geometry.height);
        for (std::size_t k = 0; k < s.normal.data.size(); ++k) {
            const int ch = static_cast<int>(k % imaging::kChannels);
            double v = dark.data[k] + t[ch] * (white.data[k] - dark.data[k]) * exposure_ratio;
            if (noise.sigma_read > 0.0) v += noise.sigma_read * read_noise(rng);
            s.normal.data[k] = std::max(v, 0.0);
        }
        s.tau1 = illum.tau1;
        s.tau2 = illum.tau2;
        s.mm_per_pixel = geometry.mm_per_pixel;
        s.label = {series.flavor, series.fractions[i], classes[i]};
        stacks.push_back(std::move(s));
    }
    return stacks;
}

}  // namespace puree::photonics

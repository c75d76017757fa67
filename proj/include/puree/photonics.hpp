#pragma once

// Beer-Lambert forward model for homogeneous puree media and synthesis of
// raw acquisition stacks (normal / dark / white frames).

#include "puree/imaging.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace puree::photonics {

using Rgb3 = std::array<double, 3>;

/// One absorber in the medium: exponent contribution is
/// extinction[ch] * concentration * path_length.
struct ChromophoreTerm {
    std::string name;
    Rgb3 extinction{};          // mm^-1 per unit relative concentration
    double concentration = 0.0; // relative units
    double path_length = 1.0;   // mm
};

struct OpticalMedium {
    std::vector<ChromophoreTerm> terms;
};

/// Throws std::invalid_argument if a term violates its bounds or the medium is empty.
void validate(const OpticalMedium& m);

/// Per-channel optical density sum(extinction * concentration * path_length).
Rgb3 optical_density(const OpticalMedium& m);

/// T = exp(-optical_density), per channel, in (0, 1].
Rgb3 transmittance(const OpticalMedium& m);

/// Mixes `fraction` of the medium with (1 - fraction) pure diluent. Absorber
/// concentrations scale by `fraction`; the diluent term becomes
/// c * fraction + (1 - fraction) * pure_diluent_concentration.
OpticalMedium dilute(const OpticalMedium& m, double fraction, const std::string& diluent,
                     double pure_diluent_concentration = 1.0);

inline const std::vector<double> kDefaultFractions{1.0, 0.8, 0.6, 0.4, 0.2};

struct DilutionSeries {
    std::string flavor;
    OpticalMedium base;
    std::vector<double> fractions = kDefaultFractions;
    std::string diluent = "water";
    double pure_diluent_concentration = 1.0;
};

/// Fractions must lie in (0, 1] and be strictly monotone.
void validate(const DilutionSeries& s);

/// Class index of each fraction: 0 for the most concentrated sample.
std::vector<int> dilution_classes(const DilutionSeries& s);

struct Geometry {
    int width = 200;
    int height = 200;
    double mm_per_pixel = 0.25;
};

/// Illumination and exposure. The white frame carries a radial falloff
/// white_level * (1 - vignetting * r^2), r normalised to 1 at the corners.
struct Illumination {
    double white_level = 0.9;
    double dark_level = 0.02;
    double vignetting = 0.0;
    double tau1 = 10.0;  // normal-frame exposure, ms
    double tau2 = 10.0;  // white-frame exposure, ms
};

struct NoiseSpec {
    double sigma_read = 0.0;
    std::uint64_t seed = 0;
};

/// One stack per fraction. The normal frame is
///   I = I_d + T * (I_w - I_d) * tau1 / tau2 + N(0, sigma_read),
/// floored at zero. Stack i draws from a generator seeded with noise.seed + i.
std::vector<imaging::AcquisitionStack> simulate_acquisition(const DilutionSeries& series,
                                                            const Geometry& geometry,
                                                            const Illumination& illum,
                                                            const NoiseSpec& noise);

/// Noise-free transmittance of every fraction in the series.
std::vector<Rgb3> series_transmittance(const DilutionSeries& series);

}  // namespace puree::photonics

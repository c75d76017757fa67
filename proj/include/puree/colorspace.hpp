#pragma once

// sRGB / linear RGB / XYZ (D65, 2 degree observer) / CIELAB conversions and
// per-group CIELAB Gaussian fits.

#include <Eigen/Core>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace puree::color {

/// Gamma-encoded sRGB, channels in [0, 1].
struct SrgbColor {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
};

/// Linear-light RGB with sRGB primaries, channels in [0, 1].
struct LinearRgb {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
};

struct Xyz {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

struct LabColor {
    double L = 0.0;
    double a = 0.0;
    double b = 0.0;
};

/// Reference white of the sRGB matrix, i.e. XYZ of linear (1, 1, 1).
Xyz d65_white();

double decode_srgb_channel(double v);
double encode_srgb_channel(double v);

// Channel values within 1e-9 of [0, 1] are clamped; anything further out
// throws std::domain_error.
LinearRgb srgb_to_linear(const SrgbColor& c);
SrgbColor linear_to_srgb(const LinearRgb& c);
Xyz linear_to_xyz(const LinearRgb& c);
LabColor xyz_to_lab(const Xyz& c);

LabColor srgb_to_lab(const SrgbColor& c);
LabColor linear_rgb_to_lab(const LinearRgb& c);

/// CIE76 colour difference.
double delta_e76(const LabColor& lhs, const LabColor& rhs);

struct LabDistribution {
    std::string label;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    /// Unbiased sample covariance over (L, a, b); zero when n == 1.
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
    std::size_t n = 0;
};

/// Throws std::invalid_argument on an empty pixel set.
LabDistribution lab_distribution(std::span<const LabColor> pixels, std::string label);

/// (a*, b*) of a distribution divided by its mean L*, with the matching
/// covariance block scaled by 1 / L*^2.
struct NormalizedAb {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
};

/// Throws std::domain_error when mean L* <= 0.
NormalizedAb l_normalized_ab(const LabDistribution& d);

/// Writes `label, n, mean_L, mean_a, mean_b, cov_LL, cov_La, cov_Lb, cov_aa,
/// cov_ab, cov_bb` rows, 9 significant digits.
void write_distribution_csv(std::ostream& out, std::span<const LabDistribution> rows);

}  // namespace puree::color

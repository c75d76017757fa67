#include "puree/colorspace.hpp"

#include "puree/csv.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace puree::color {

namespace {

constexpr double kClampSlack = 1e-9;

// IEC 61966-2-1 linear sRGB -> XYZ.
constexpr double kRgbToXyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};

// (6/29)^3 and the slope/offset of the linear segment of f(t).
constexpr double kDelta = 6.0 / 29.0;
constexpr double kEpsilon = kDelta * kDelta * kDelta;
constexpr double kLinearSlope = 1.0 / (3.0 * kDelta * kDelta);
constexpr double kLinearOffset = 4.0 / 29.0;

double clamp_unit(double v, const char* what) {
    if (!(v >= -kClampSlack && v <= 1.0 + kClampSlack)) {
        throw std::domain_error(std::string(what) + " channel outside [0, 1]");
    }
    return std::clamp(v, 0.0, 1.0);
}

double lab_f(double t) {
    return t > kEpsilon ? std::cbrt(t) : t * kLinearSlope + kLinearOffset;
}

}  // namespace

Xyz d65_white() {
    return linear_to_xyz(LinearRgb{1.0, 1.0, 1.0});
}

double decode_srgb_channel(double v) {
    v = clamp_unit(v, "sRGB");
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double encode_srgb_channel(double v) {
    v = clamp_unit(v, "linear RGB");
    return v <= 0.0031308 ? v * 12.92 : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

LinearRgb srgb_to_linear(const SrgbColor& c) {
    return {decode_srgb_channel(c.r), decode_srgb_channel(c.g), decode_srgb_channel(c.b)};
}

SrgbColor linear_to_srgb(const LinearRgb& c) {
    return {encode_srgb_channel(c.r), encode_srgb_channel(c.g), encode_srgb_channel(c.b)};
}

Xyz linear_to_xyz(const LinearRgb& c) {
    const double r = clamp_unit(c.r, "linear RGB");
    const double g = clamp_unit(c.g, "linear RGB");
    const double b = clamp_unit(c.b, "linear RGB");
    const auto& m = kRgbToXyz;
    return {
        m[0][0] * r + m[0][1] * g + m[0][2] * b,
        m[1][0] * r + m[1][1] * g + m[1][2] * b,
        m[2][0] * r + m[2][1] * g + m[2][2] * b,
    };
}

LabColor xyz_to_lab(const Xyz& c) {
    static const Xyz white = d65_white();
    const double fx = lab_f(c.x / white.x);
    const double fy = lab_f(c.y / white.y);
    const double fz = lab_f(c.z / white.z);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

LabColor srgb_to_lab(const SrgbColor& c) {
    return xyz_to_lab(linear_to_xyz(srgb_to_linear(c)));
}

LabColor linear_rgb_to_lab(const LinearRgb& c) {
    return xyz_to_lab(linear_to_xyz(c));
}

double delta_e76(const LabColor& lhs, const LabColor& rhs) {
    return std::hypot(lhs.L - rhs.L, lhs.a - rhs.a, lhs.b - rhs.b);
}

LabDistribution lab_distribution(std::span<const LabColor> pixels, std::string label) {
    if (pixels.empty()) {
        throw std::invalid_argument("lab_distribution: no pixels for group '" + label + "'");
    }
    // Welford update of mean and co-moment matrix.
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    Eigen::Matrix3d comoment = Eigen::Matrix3d::Zero();
    std::size_t n = 0;
    for (const auto& p : pixels) {
        ++n;
        const Eigen::Vector3d x(p.L, p.a, p.b);
        const Eigen::Vector3d before = x - mean;
        mean += before / static_cast<double>(n);
        comoment += before * (x - mean).transpose();
    }

    LabDistribution d;
    d.label = std::move(label);
    d.mean = mean;
    d.n = n;
    if (n > 1) {
        d.covariance = comoment / static_cast<double>(n - 1);
        d.covariance = 0.5 * (d.covariance + d.covariance.transpose()).eval();
    }
    return d;
}

NormalizedAb l_normalized_ab(const LabDistribution& d) {
    const double lightness = d.mean(0);
    if (!(lightness > 0.0)) {
        throw std::domain_error("l_normalized_ab: mean L* must be positive for '" + d.label + "'");
    }
    NormalizedAb out;
    out.mean = d.mean.tail<2>() / lightness;
    out.covariance = d.covariance.bottomRightCorner<2, 2>() / (lightness * lightness);
    return out;
}

void write_distribution_csv(std::ostream& out, std::span<const LabDistribution> rows) {
    out << "label,n,mean_L,mean_a,mean_b,cov_LL,cov_La,cov_Lb,cov_aa,cov_ab,cov_bb\n";
    for (const auto& d : rows) {
        const auto& c = d.covariance;
        out << d.label << ',' << d.n;
        for (double v : {d.mean(0), d.mean(1), d.mean(2), c(0, 0), c(0, 1), c(0, 2), c(1, 1),
                         c(1, 2), c(2, 2)}) {
            out << ',' << csv::number(v);
        }
        out << '\n';
    }
}

}  // namespace puree::color

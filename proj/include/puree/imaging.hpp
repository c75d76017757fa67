#pragma once

// White/dark normalisation, region-of-interest cropping, patch sampling and
// percent-transmittance maps.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace puree::imaging {

inline constexpr int kChannels = 3;
inline constexpr double kDefaultTMax = 2.0;
inline constexpr double kDefaultDenomEps = 1e-6;

/// Row-major, channel-interleaved, 3-channel intensities >= 0.
struct RawImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    RawImage() = default;
    RawImage(int w, int h, double fill = 0.0);

    double& at(int x, int y, int c) { return data[index(x, y, c)]; }
    double at(int x, int y, int c) const { return data[index(x, y, c)]; }
    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width + x) * kChannels + c;
    }
};

/// Throws std::invalid_argument if sizes disagree or a value is negative/non-finite.
void validate(const RawImage& img);

/// Flavor plus dilution of one acquisition.
struct SampleLabel {
    std::string flavor;
    double fraction = 1.0;
    int dilution_class = 0;

    std::string to_string() const;
};

struct AcquisitionStack {
    RawImage normal;
    RawImage dark;
    RawImage white;
    double tau1 = 1.0;  // normal-frame exposure, ms
    double tau2 = 1.0;  // white-frame exposure, ms
    double mm_per_pixel = 1.0;
    SampleLabel label;
};

struct TransmittanceImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;
    /// 1 where the pixel is valid.
    std::vector<std::uint8_t> mask;
    SampleLabel label;
    /// Set when more than half of the pixels are masked.
    std::optional<std::string> warning;

    double at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
    }
    bool valid(int x, int y) const { return mask[static_cast<std::size_t>(y) * width + x] != 0; }
    double masked_fraction() const;
};

struct NormalizeOptions {
    double denom_eps = kDefaultDenomEps;
    double t_max = kDefaultTMax;
};

/// T = (I - I_d) / (I_w - I_d) * tau2 / tau1, clipped to [0, t_max]. A pixel
/// is masked when any channel has I_w - I_d <= denom_eps.
TransmittanceImage normalize(const AcquisitionStack& stack, const NormalizeOptions& opts = {});

struct RoiSize {
    double width_mm = 35.0;
    double height_mm = 35.0;
};

/// Centred crop of floor(size / mm_per_pixel) pixels, odd slack going to the
/// top-left. Throws std::invalid_argument if the ROI does not fit.
TransmittanceImage center_roi(const TransmittanceImage& img, RoiSize roi, double mm_per_pixel);

struct PatchSize {
    int rows = 25;
    int cols = 50;
};

struct Origin {
    int x = 0;
    int y = 0;
    bool operator==(const Origin&) const = default;
};

struct Patch {
    /// rows * cols * 3 transmittance values, row-major, channel-interleaved.
    std::vector<float> pixels;
    Origin origin;
    int dilution_class = 0;
    int flavor_id = 0;
};

inline constexpr PatchSize kPatchSize{};
inline constexpr std::size_t kPatchValues =
    static_cast<std::size_t>(kPatchSize.rows) * kPatchSize.cols * kChannels;

/// Draws n origins uniformly over the in-bounds origin set, redrawing any
/// patch that covers a masked pixel. Gives up after 100 * n draws.
std::vector<Origin> draw_patch_origins(const TransmittanceImage& img, std::size_t n, PatchSize size,
                                       std::mt19937_64& rng);

std::vector<Patch> extract_patches(const TransmittanceImage& img, std::size_t n, PatchSize size,
                                   std::uint64_t seed, int flavor_id = 0);

struct TransmittanceMap {
    int width = 0;
    int height = 0;
    /// 100 * T per pixel, NaN where masked.
    std::vector<double> percent;
    /// Mean of valid pixels per row, NaN for fully masked rows.
    std::vector<double> row_profile;
};

TransmittanceMap transmittance_map(const TransmittanceImage& img, int channel);

}  // namespace puree::imaging

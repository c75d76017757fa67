#include "puree/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace puree::imaging {

RawImage::RawImage(int w, int h, double fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h * kChannels, fill) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("image dimensions must be positive");
}

void validate(const RawImage& img) {
    if (img.width <= 0 || img.height <= 0) {
        throw std::invalid_argument("image dimensions must be positive");
    }
    if (img.data.size() != static_cast<std::size_t>(img.width) * img.height * kChannels) {
        throw std::invalid_argument("image data length does not match width * height * 3");
    }
    for (double v : img.data) {
        if (!std::isfinite(v) || v < 0.0) {
            throw std::invalid_argument("image intensities must be finite and >= 0");
        }
    }
}

std::string SampleLabel::to_string() const {
    std::ostringstream os;
    os << flavor << '_' << static_cast<int>(std::lround(fraction * 100.0));
    return os.str();
}

double TransmittanceImage::masked_fraction() const {
    if (mask.empty()) return 0.0;
    const auto valid = std::count(mask.begin(), mask.end(), std::uint8_t{1});
    return 1.0 - static_cast<double>(valid) / static_cast<double>(mask.size());
}

namespace {

void attach_mask_warning(TransmittanceImage& img) {
    const double masked = img.masked_fraction();
    if (masked > 0.5) {
        std::ostringstream os;
        os << img.label.to_string() << ": " << masked * 100.0 << "% of pixels masked";
        img.warning = os.str();
    } else {
        img.warning.reset();
    }
}

}  // namespace

TransmittanceImage normalize(const AcquisitionStack& stack, const NormalizeOptions& opts) {
    if (!(opts.denom_eps > 0.0)) throw std::invalid_argument("denom_eps must be > 0");
    if (!(opts.t_max > 0.0)) throw std::invalid_argument("t_max must be > 0");
    if (!(stack.tau1 > 0.0) || !(stack.tau2 > 0.0)) {
        throw std::invalid_argument("exposure times must be > 0");
    }
    for (const RawImage* img : {&stack.normal, &stack.dark, &stack.white}) validate(*img);
    const auto same_dims = [&](const RawImage& img) {
        return img.width == stack.normal.width && img.height == stack.normal.height;
    };
    if (!same_dims(stack.dark) || !same_dims(stack.white)) {
        throw std::invalid_argument("normal, dark and white frames differ in size");
    }

    TransmittanceImage out;
    out.width = stack.normal.width;
    out.height = stack.normal.height;
    out.label = stack.label;
    out.data.assign(stack.normal.data.size(), 0.0);
    out.mask.assign(static_cast<std::size_t>(out.width) * out.height, 1);

    const double exposure = stack.tau2 / stack.tau1;
    for (std::size_t px = 0; px < out.mask.size(); ++px) {
        const std::size_t base = px * kChannels;
        bool valid = true;
        for (int c = 0; c < kChannels; ++c) {
            valid = valid && (stack.white.data[base + c] - stack.dark.data[base + c] > opts.denom_eps);
        }
        if (!valid) {
            out.mask[px] = 0;
            continue;
        }
        for (int c = 0; c < kChannels; ++c) {
            const double signal = stack.normal.data[base + c] - stack.dark.data[base + c];
            const double reference = stack.white.data[base + c] - stack.dark.data[base + c];
            out.data[base + c] = std::clamp(signal / reference * exposure, 0.0, opts.t_max);
        }
    }
    attach_mask_warning(out);
    return out;
}

TransmittanceImage center_roi(const TransmittanceImage& img, RoiSize roi, double mm_per_pixel) {
    if (!(mm_per_pixel > 0.0)) throw std::invalid_argument("mm_per_pixel must be > 0");
    // The slack keeps exact quotients such as 35 / 0.1 from rounding down.
    const auto pixels = [&](double mm) {
        return static_cast<long>(std::floor(mm / mm_per_pixel + 1e-9));
    };
    const long w = pixels(roi.width_mm);
    const long h = pixels(roi.height_mm);
    if (w < 1 || h < 1 || w > img.width || h > img.height) {
        std::ostringstream os;
        os << "ROI of " << w << "x" << h << " px does not fit a " << img.width << "x" << img.height
           << " image";
        throw std::invalid_argument(os.str());
    }
    const int x0 = static_cast<int>((img.width - w) / 2);
    const int y0 = static_cast<int>((img.height - h) / 2);

    TransmittanceImage out;
    out.width = static_cast<int>(w);
    out.height = static_cast<int>(h);
    out.label = img.label;
    out.data.reserve(static_cast<std::size_t>(w) * h * kChannels);
    out.mask.reserve(static_cast<std::size_t>(w) * h);
    for (int y = y0; y < y0 + out.height; ++y) {
        const std::size_t row = static_cast<std::size_t>(y) * img.width;
        out.mask.insert(out.mask.end(), img.mask.begin() + row + x0,
                        img.mask.begin() + row + x0 + out.width);
        out.data.insert(out.data.end(), img.data.begin() + (row + x0) * kChannels,
                        img.data.begin() + (row + x0 + out.width) * kChannels);
    }
    attach_mask_warning(out);
    return out;
}

namespace {

bool patch_is_valid(const TransmittanceImage& img, Origin o, PatchSize size) {
    for (int y = o.y; y < o.y + size.rows; ++y) {
        for (int x = o.x; x < o.x + size.cols; ++x) {
            if (!img.valid(x, y)) return false;
        }
    }
    return true;
}

}  // namespace

std::vector<Origin> draw_patch_origins(const TransmittanceImage& img, std::size_t n, PatchSize size,
                                       std::mt19937_64& rng) {
    if (n == 0) throw std::invalid_argument("patch count must be >= 1");
    if (size.rows < 1 || size.cols < 1) throw std::invalid_argument("patch size must be positive");
    if (img.width < size.cols || img.height < size.rows) {
        std::ostringstream os;
        os << "a " << size.rows << "x" << size.cols << " patch does not fit a " << img.width << "x"
           << img.height << " image";
        throw std::invalid_argument(os.str());
    }
    std::uniform_int_distribution<int> pick_x(0, img.width - size.cols);
    std::uniform_int_distribution<int> pick_y(0, img.height - size.rows);
    const bool fully_valid = std::all_of(img.mask.begin(), img.mask.end(),
                                         [](std::uint8_t m) { return m != 0; });

    std::vector<Origin> origins;
    origins.reserve(n);
    const std::size_t max_attempts = 100 * n;
    for (std::size_t attempt = 0; attempt < max_attempts && origins.size() < n; ++attempt) {
        const Origin o{pick_x(rng), pick_y(rng)};
        if (fully_valid || patch_is_valid(img, o, size)) origins.push_back(o);
    }
    if (origins.size() < n) {
        std::ostringstream os;
        os << "placed only " << origins.size() << " of " << n << " unmasked patches in "
           << max_attempts << " attempts";
        throw std::runtime_error(os.str());
    }
    return origins;
}

std::vector<Patch> extract_patches(const TransmittanceImage& img, std::size_t n, PatchSize size,
                                   std::uint64_t seed, int flavor_id) {
    std::mt19937_64 rng(seed);
    const auto origins = draw_patch_origins(img, n, size, rng);

    std::vector<Patch> patches;
    patches.reserve(n);
    for (const Origin& o : origins) {
        Patch p;
        p.origin = o;
        p.dilution_class = img.label.dilution_class;
        p.flavor_id = flavor_id;
        p.pixels.reserve(static_cast<std::size_t>(size.rows) * size.cols * kChannels);
        for (int y = o.y; y < o.y + size.rows; ++y) {
            for (int x = o.x; x < o.x + size.cols; ++x) {
                for (int c = 0; c < kChannels; ++c) {
                    p.pixels.push_back(static_cast<float>(img.at(x, y, c)));
                }
            }
        }
        patches.push_back(std::move(p));
    }
    return patches;
}

TransmittanceMap transmittance_map(const TransmittanceImage& img, int channel) {
    if (channel < 0 || channel >= kChannels) {
        throw std::invalid_argument("channel index must be 0, 1 or 2");
    }
    if (std::none_of(img.mask.begin(), img.mask.end(), [](std::uint8_t m) { return m != 0; })) {
        throw std::invalid_argument("transmittance map: every pixel is masked");
    }
    TransmittanceMap map;
    map.width = img.width;
    map.height = img.height;
    map.percent.assign(static_cast<std::size_t>(img.width) * img.height,
                       std::numeric_limits<double>::quiet_NaN());
    map.row_profile.assign(img.height, std::numeric_limits<double>::quiet_NaN());
    for (int y = 0; y < img.height; ++y) {
        double sum = 0.0;
        int count = 0;
        for (int x = 0; x < img.width; ++x) {
            if (!img.valid(x, y)) continue;
            const double pct = 100.0 * img.at(x, y, channel);
            map.percent[static_cast<std::size_t>(y) * img.width + x] = pct;
            sum += pct;
            ++count;
        }
        if (count > 0) map.row_profile[y] = sum / count;
    }
    return map;
}

}  // namespace puree::imaging

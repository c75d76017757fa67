#pragma once

// On-disk formats.
//
// PRAW v1: ASCII line "PRAW 1 <width> <height> <channels> <tau_ms>\n" followed
// by width*height*channels little-endian float32 values, row-major and
// channel-interleaved. Transmittance images use the same layout with NaN at
// masked pixels.
//
// PATCH v1: ASCII line "PATCH 1 <count> 25 50 3\n", then per patch one uint8
// dilution class, one uint8 flavor id and 3750 little-endian float32 values.

#include "puree/imaging.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace puree::formats {

struct PrawImage {
    imaging::RawImage image;
    double tau_ms = 0.0;
};

void write_praw(std::ostream& out, const imaging::RawImage& img, double tau_ms);
/// Throws std::runtime_error on a malformed header or short payload.
PrawImage read_praw(std::istream& in);

void write_transmittance(std::ostream& out, const imaging::TransmittanceImage& img);
imaging::TransmittanceImage read_transmittance(std::istream& in);

void write_patches(std::ostream& out, std::span<const imaging::Patch> patches);
std::vector<imaging::Patch> read_patches(std::istream& in);

/// Stack directory: normal.praw (tau1), dark.praw (tau1), white.praw (tau2)
/// and stack.json holding the label and pixel pitch.
void write_stack(const std::filesystem::path& dir, const imaging::AcquisitionStack& stack);
imaging::AcquisitionStack read_stack(const std::filesystem::path& dir);

/// Label sidecar shared by stack and transmittance files. Returns false when
/// absent.
bool read_label(const std::filesystem::path& dir, imaging::SampleLabel& label,
                double& mm_per_pixel);

/// Percent grid, one CSV row per image row; masked cells are "nan".
void write_map_csv(std::ostream& out, const imaging::TransmittanceMap& map);
/// Columns `row, mean_percent`.
void write_profile_csv(std::ostream& out, const imaging::TransmittanceMap& map);

}  // namespace puree::formats

#pragma once

// Pipeline configuration (JSON, "version": 1). Unknown keys are rejected.
// See README.md for the key schema.

#include "puree/autoencoder.hpp"
#include "puree/imaging.hpp"
#include "puree/photonics.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace puree::config {

/// Any configuration or validation failure; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Flavor {
    std::string name;
    photonics::OpticalMedium medium;
};

struct PhotonicsConfig {
    std::vector<Flavor> flavors;
    std::vector<double> fractions = photonics::kDefaultFractions;
    std::string diluent = "water";
    double pure_diluent_concentration = 1.0;
};

struct Seeds {
    std::uint64_t simulate = 0;
    std::uint64_t patches = 0;
    std::uint64_t pretrain = 0;
    std::uint64_t init = 0;
};

struct PretrainConfig {
    nn::TrainConfig train;
    std::size_t patches_per_stack = 40;
    /// Extra Gaussian noise on the reflectance-like corpus, reflectance units.
    double noise = 0.02;
};

struct RunConfig {
    std::string id;
    std::uint64_t seed = 0;
};

struct ExperimentConfig {
    std::vector<std::string> flavors;
    double train_fraction = 0.8;
    std::vector<RunConfig> runs;
};

struct PipelineConfig {
    std::filesystem::path output_dir = "out";
    PhotonicsConfig photonics;
    photonics::Geometry geometry;
    photonics::Illumination illumination;
    double sigma_read = 0.0;
    int acquisitions = 1;
    double roi_mm = 35.0;
    imaging::NormalizeOptions normalize;
    std::size_t patches_per_stack = 40;
    std::vector<Eigen::Index> encoder_widths{512, 128};
    PretrainConfig pretrain;
    nn::TrainConfig finetune;
    ExperimentConfig experiment;
    Seeds seeds;
};

/// Parses a config document. Relative "photonics" file references resolve
/// against `base_dir`.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
PipelineConfig load_config(const std::filesystem::path& path);

/// Cross-field checks (flavor names, patch geometry, stratum sizes, ...).
void validate(const PipelineConfig& cfg);

/// Replaces every seed: simulate = s, patches = s + 1, pretrain = s + 2,
/// init = s + 3, run i = s + 100 + i.
void override_seed(PipelineConfig& cfg, std::uint64_t seed);

photonics::DilutionSeries series_for(const PipelineConfig& cfg, std::size_t flavor_index);

}  // namespace puree::config

#pragma once

// Batch pipeline stages behind the `puree` command line tool.
//
// Output layout under the output directory:
//   stacks/<flavor>_<pct>/{normal,dark,white}.praw, stack.json, transmittance.praw
//   patches.bin                     PATCH v1 dataset of the experiment flavors
//   pretrained.net, loss_pretrain.csv
//   runs/<run_id>/finetuned.net, runs/<run_id>/loss.csv
//   report.csv, summary.csv
//   analysis/lab_distributions.csv, analysis/lab_ab_normalized.csv,
//   analysis/maps/<label>_map.csv, analysis/maps/<label>_profile.csv

#include "puree/config.hpp"
#include "puree/experiment.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace puree::pipeline {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

struct CommandOptions {
    std::optional<std::filesystem::path> config;
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    /// Positional inputs (analyze only).
    std::vector<std::filesystem::path> inputs;
};

/// In-memory stages, shared by the commands and the tests.
struct StackSet {
    std::vector<std::string> names;
    std::vector<imaging::AcquisitionStack> stacks;
};

StackSet simulate_stacks(const config::PipelineConfig& cfg, std::uint64_t seed);
std::vector<imaging::Patch> build_patches(const config::PipelineConfig& cfg,
                                          const std::vector<imaging::TransmittanceImage>& images);
/// Reflectance-like corpus (1 - T plus Gaussian noise) from a simulation
/// seeded independently of the transmittance data.
nn::Batch pretrain_corpus(const config::PipelineConfig& cfg);
nn::TrainResult pretrain(const config::PipelineConfig& cfg);
std::vector<experiment::RunSpec> run_specs(const config::PipelineConfig& cfg);
experiment::ProtocolOptions protocol_options(const config::PipelineConfig& cfg);

/// Commands. Each returns an exit code: 0 success, 1 runtime failure,
/// 2 configuration/validation failure. Diagnostics go to `err`, tables and
/// progress to `log` unless quiet.
int cmd_simulate(const CommandOptions& opts, std::ostream& log, std::ostream& err);
int cmd_normalize(const CommandOptions& opts, std::ostream& log, std::ostream& err);
int cmd_patch(const CommandOptions& opts, std::ostream& log, std::ostream& err);
int cmd_pretrain(const CommandOptions& opts, std::ostream& log, std::ostream& err);
int cmd_finetune(const CommandOptions& opts, std::ostream& log, std::ostream& err);
int cmd_eval(const CommandOptions& opts, std::ostream& log, std::ostream& err);
int cmd_analyze(const CommandOptions& opts, std::ostream& log, std::ostream& err);
int cmd_run(const CommandOptions& opts, std::ostream& log, std::ostream& err);

/// Dispatches by subcommand name; unknown names return 2.
int run_command(std::string_view name, const CommandOptions& opts, std::ostream& log, std::ostream& err);

}  // namespace puree::pipeline

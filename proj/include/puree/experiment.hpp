#pragma once

// Stratified splitting, the multi-run fine-tune/evaluate protocol and
// accuracy reporting.

#include "puree/autoencoder.hpp"
#include "puree/imaging.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace puree::experiment {

/// Indices into the patch list. Both lists are sorted and disjoint.
struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
};

inline constexpr std::size_t kMinStratumSize = 5;

/// Splits every (flavor, dilution class) stratum so that
/// round_half_up(train_fraction * n) of it goes to training.
/// Throws std::invalid_argument for strata smaller than kMinStratumSize or
/// an empty test partition.
DatasetSplit split_dataset(std::span<const imaging::Patch> patches, double train_fraction,
                           std::uint64_t seed);

/// Percentage of matching entries.
double accuracy(std::span<const int> predictions, std::span<const int> labels);

/// Network input for the given patches: pixel / t_max, one column per patch.
nn::Batch make_batch(std::span<const imaging::Patch> patches, std::span<const std::size_t> indices,
                     double t_max);

struct GroupAccuracy {
    std::string group;
    std::size_t correct = 0;
    std::size_t total = 0;

    double percent() const;
};

struct RunResult {
    std::string run_id;
    std::uint64_t seed = 0;
    /// Combined group first, then one entry per flavor.
    std::vector<GroupAccuracy> groups;
    std::vector<double> loss_history;
    nn::NetworkParams params;
};

struct AccuracyReport {
    std::vector<std::string> groups;
    /// Ordered by run_id.
    std::vector<RunResult> runs;
};

struct ColumnSummary {
    std::string group;
    double mean = 0.0;
    /// Sample standard deviation; 0 for a single run.
    double std = 0.0;
    double max = 0.0;
    std::size_t n_runs = 0;
};

ColumnSummary summarize_column(std::string group, std::span<const double> percents);
std::vector<ColumnSummary> summarize(const AccuracyReport& report);

struct RunSpec {
    std::string run_id;
    /// Drives the split; training shuffles with cfg.seed.
    std::uint64_t seed = 0;
    nn::TrainConfig cfg;
};

struct ProtocolOptions {
    /// Name of each flavor id; the flavors evaluated individually.
    std::vector<std::string> flavor_names;
    double train_fraction = 0.8;
    double t_max = imaging::kDefaultTMax;
};

/// Per-group accuracy of `net` on the listed patches.
std::vector<GroupAccuracy> evaluate(const nn::NetworkParams& net,
                                    std::span<const imaging::Patch> patches,
                                    std::span<const std::size_t> indices,
                                    const ProtocolOptions& opts);

/// Thrown when one run fails; carries the run id.
class RunFailed : public std::runtime_error {
public:
    RunFailed(std::string run_id, const std::string& what)
        : std::runtime_error(what), run_id_(std::move(run_id)) {}
    const std::string& run_id() const { return run_id_; }

private:
    std::string run_id_;
};

/// Fine-tunes a copy of `pretrained` on the training partition of the run's split.
nn::TrainResult finetune_once(std::span<const imaging::Patch> patches,
                              const nn::NetworkParams& pretrained, const RunSpec& spec,
                              const ProtocolOptions& opts);

RunResult run_once(std::span<const imaging::Patch> patches, const nn::NetworkParams& pretrained,
                   const RunSpec& spec, const ProtocolOptions& opts);

/// Split, fine-tune from `pretrained` and evaluate once per run spec.
AccuracyReport run_protocol(std::span<const imaging::Patch> patches,
                            const nn::NetworkParams& pretrained, std::span<const RunSpec> runs,
                            const ProtocolOptions& opts);

/// Columns `run_id, group, accuracy_percent`.
void write_report_csv(std::ostream& out, const AccuracyReport& report);
/// Columns `group, mean, std, max, n_runs`.
void write_summary_csv(std::ostream& out, const AccuracyReport& report);
/// Per-run rows plus mean +/- std and max rows, whole percents.
std::string format_table(const AccuracyReport& report);

}  // namespace puree::experiment

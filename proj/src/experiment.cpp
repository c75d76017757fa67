#include "puree/experiment.hpp"

#include "puree/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace puree::experiment {

DatasetSplit split_dataset(std::span<const imaging::Patch> patches, double train_fraction,
                           std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
        throw std::invalid_argument("train fraction must lie in (0, 1]");
    }
    std::map<std::pair<int, int>, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        strata[{patches[i].flavor_id, patches[i].dilution_class}].push_back(i);
    }
    if (strata.empty()) throw std::invalid_argument("cannot split an empty dataset");

    DatasetSplit split;
    split.seed = seed;
    std::mt19937_64 rng(seed);
    for (auto& [key, members] : strata) {
        if (members.size() < kMinStratumSize) {
            std::ostringstream os;
            os << "stratum flavor " << key.first << " / class " << key.second << " has "
               << members.size() << " patches, needs at least " << kMinStratumSize;
            throw std::invalid_argument(os.str());
        }
        std::shuffle(members.begin(), members.end(), rng);
        const auto n_train = static_cast<std::size_t>(
            std::floor(train_fraction * static_cast<double>(members.size()) + 0.5));
        split.train.insert(split.train.end(), members.begin(),
                           members.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train),
                          members.end());
    }
    if (split.test.empty()) throw std::invalid_argument("split leaves no test patches");
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size()) {
        throw std::invalid_argument("predictions and labels differ in length");
    }
    if (predictions.empty()) throw std::invalid_argument("accuracy of an empty set");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
    return 100.0 * static_cast<double>(correct) / static_cast<double>(labels.size());
}

nn::Batch make_batch(std::span<const imaging::Patch> patches, std::span<const std::size_t> indices,
                     double t_max) {
    if (!(t_max > 0.0)) throw std::invalid_argument("t_max must be > 0");
    nn::Batch batch;
    batch.inputs.resize(static_cast<Eigen::Index>(imaging::kPatchValues),
                        static_cast<Eigen::Index>(indices.size()));
    batch.labels.reserve(indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j) {
        const auto& p = patches[indices[j]];
        if (p.pixels.size() != imaging::kPatchValues) {
            throw std::invalid_argument("patch does not hold 25x50x3 values");
        }
        for (std::size_t k = 0; k < p.pixels.size(); ++k) {
            batch.inputs(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
                static_cast<double>(p.pixels[k]) / t_max;
        }
        batch.labels.push_back(p.dilution_class);
    }
    return batch;
}

double GroupAccuracy::percent() const {
    if (total == 0) throw std::logic_error("group '" + group + "' has no samples");
    return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

ColumnSummary summarize_column(std::string group, std::span<const double> percents) {
    if (percents.empty()) throw std::invalid_argument("cannot summarise zero runs");
    ColumnSummary s;
    s.group = std::move(group);
    s.n_runs = percents.size();
    double sum = 0.0;
    for (double v : percents) sum += v;
    s.mean = sum / static_cast<double>(percents.size());
    if (percents.size() > 1) {
        double ss = 0.0;
        for (double v : percents) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(percents.size() - 1));
    }
    s.max = *std::max_element(percents.begin(), percents.end());
    return s;
}

std::vector<ColumnSummary> summarize(const AccuracyReport& report) {
    std::vector<ColumnSummary> out;
    for (std::size_t g = 0; g < report.groups.size(); ++g) {
        std::vector<double> column;
        for (const auto& run : report.runs) column.push_back(run.groups.at(g).percent());
        out.push_back(summarize_column(report.groups[g], column));
    }
    return out;
}

namespace {

std::string combined_name(const std::vector<std::string>& flavors) {
    std::string name;
    for (const auto& f : flavors) name += (name.empty() ? "" : "+") + f;
    return name;
}

}  // namespace

std::vector<GroupAccuracy> evaluate(const nn::NetworkParams& net,
                                    std::span<const imaging::Patch> patches,
                                    std::span<const std::size_t> indices,
                                    const ProtocolOptions& opts) {
    std::vector<GroupAccuracy> groups;
    groups.push_back({combined_name(opts.flavor_names), 0, 0});
    for (const auto& f : opts.flavor_names) groups.push_back({f, 0, 0});

    const nn::Batch batch = make_batch(patches, indices, opts.t_max);
    const Eigen::MatrixXd probs = nn::forward_stack(net.head, nn::forward_stack(net.encoder, batch.inputs));
    for (std::size_t j = 0; j < indices.size(); ++j) {
        const auto& p = patches[indices[j]];
        if (p.flavor_id < 0 || static_cast<std::size_t>(p.flavor_id) >= opts.flavor_names.size()) {
            throw std::invalid_argument("patch flavor id has no name");
        }
        const auto col = probs.col(static_cast<Eigen::Index>(j));
        const int predicted = nn::argmax(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
        const bool hit = predicted == p.dilution_class;
        for (auto* g : {&groups[0], &groups[1 + static_cast<std::size_t>(p.flavor_id)]}) {
            g->correct += hit;
            ++g->total;
        }
    }
    for (const auto& g : groups) {
        if (g.total == 0) throw std::invalid_argument("no test patches for group '" + g.group + "'");
    }
    return groups;
}

nn::TrainResult finetune_once(std::span<const imaging::Patch> patches,
                              const nn::NetworkParams& pretrained, const RunSpec& spec,
                              const ProtocolOptions& opts) {
    const DatasetSplit split = split_dataset(patches, opts.train_fraction, spec.seed);
    nn::TrainConfig cfg = spec.cfg;
    cfg.phase = nn::Phase::finetune;
    return nn::train(pretrained, make_batch(patches, split.train, opts.t_max), cfg);
}

RunResult run_once(std::span<const imaging::Patch> patches, const nn::NetworkParams& pretrained,
                   const RunSpec& spec, const ProtocolOptions& opts) {
    try {
        const DatasetSplit split = split_dataset(patches, opts.train_fraction, spec.seed);
        auto trained = finetune_once(patches, pretrained, spec, opts);

        RunResult run;
        run.run_id = spec.run_id;
        run.seed = spec.seed;
        run.groups = evaluate(trained.params, patches, split.test, opts);
        run.loss_history = std::move(trained.loss_history);
        run.params = std::move(trained.params);
        return run;
    } catch (const std::exception& e) {
        throw RunFailed(spec.run_id, "run " + spec.run_id + ": " + e.what());
    }
}

AccuracyReport run_protocol(std::span<const imaging::Patch> patches,
                            const nn::NetworkParams& pretrained, std::span<const RunSpec> runs,
                            const ProtocolOptions& opts) {
    if (runs.empty()) throw std::invalid_argument("protocol needs at least one run");
    if (opts.flavor_names.empty()) throw std::invalid_argument("protocol needs at least one flavor");
    std::set<std::string> ids;
    for (const auto& r : runs) {
        if (!ids.insert(r.run_id).second) throw std::invalid_argument("duplicate run id '" + r.run_id + "'");
    }
    for (std::size_t f = 0; f < opts.flavor_names.size(); ++f) {
        const bool present = std::any_of(patches.begin(), patches.end(), [f](const imaging::Patch& p) {
            return p.flavor_id == static_cast<int>(f);
        });
        if (!present) throw std::invalid_argument("dataset has no patches of flavor '" + opts.flavor_names[f] + "'");
    }

    AccuracyReport report;
    report.groups.push_back(combined_name(opts.flavor_names));
    report.groups.insert(report.groups.end(), opts.flavor_names.begin(), opts.flavor_names.end());

    std::vector<const RunSpec*> ordered;
    for (const auto& r : runs) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->run_id < b->run_id; });
    for (const RunSpec* spec : ordered) report.runs.push_back(run_once(patches, pretrained, *spec, opts));
    return report;
}

void write_report_csv(std::ostream& out, const AccuracyReport& report) {
    out << "run_id,group,accuracy_percent\n";
    for (const auto& run : report.runs) {
        for (const auto& g : run.groups) out << run.run_id << ',' << g.group << ',' << csv::number(g.percent(), 17) << '\n';
    }
}

void write_summary_csv(std::ostream& out, const AccuracyReport& report) {
    out << "group,mean,std,max,n_runs\n";
    for (const auto& s : summarize(report)) {
        out << s.group << ',' << csv::number(s.mean, 17) << ',' << csv::number(s.std, 17) << ','
            << csv::number(s.max, 17) << ',' << s.n_runs << '\n';
    }
}

namespace {

std::string whole_percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f%%", std::round(v));
    return buf;
}

}  // namespace

std::string format_table(const AccuracyReport& report) {
    std::vector<std::string> header{"Network Run"};
    header.push_back(report.groups.empty() ? "" : report.groups.front());
    for (std::size_t g = 1; g < report.groups.size(); ++g) header.push_back(report.groups[g] + " only");

    std::vector<std::vector<std::string>> rows{header};
    for (const auto& run : report.runs) {
        std::vector<std::string> row{run.run_id};
        for (const auto& g : run.groups) row.push_back(whole_percent(g.percent()));
        rows.push_back(std::move(row));
    }
    const auto summary = summarize(report);
    std::vector<std::string> avg{"Average (mu +/- sigma):"};
    std::vector<std::string> max{"Max:"};
    for (const auto& s : summary) {
        avg.push_back(whole_percent(s.mean) + " +/- " + whole_percent(s.std));
        max.push_back(whole_percent(s.max));
    }
    rows.push_back(std::move(avg));
    rows.push_back(std::move(max));

    std::vector<std::size_t> widths(header.size(), 0);
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
    }
    std::ostringstream os;
    const auto rule = [&] {
        std::size_t total = 0;
        for (auto w : widths) total += w + 3;
        os << std::string(total, '-') << '\n';
    };
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (r == 0 || r == 1 || r == rows.size() - 2) rule();
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            os << rows[r][c] << std::string(widths[c] - rows[r][c].size() + 3, ' ');
        }
        os << '\n';
    }
    rule();
    return os.str();
}

}  // namespace puree::experiment

#include "puree/pipeline.hpp"

#include "puree/checkpoint.hpp"
#include "puree/colorspace.hpp"
#include "puree/csv.hpp"
#include "puree/formats.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

namespace puree::pipeline {

namespace fs = std::filesystem;
using config::ConfigError;
using config::PipelineConfig;

namespace {

constexpr std::uint64_t kSeriesSeedStride = 100;
constexpr std::uint64_t kCorpusPatchSeedOffset = 10000;
constexpr std::uint64_t kCorpusNoiseSeedOffset = 20000;

struct StackInfo {
    std::string name;
    std::size_t flavor_index = 0;
};

std::vector<StackInfo> stack_layout(const PipelineConfig& cfg) {
    std::vector<StackInfo> out;
    for (std::size_t f = 0; f < cfg.photonics.flavors.size(); ++f) {
        const auto series = config::series_for(cfg, f);
        for (int a = 0; a < cfg.acquisitions; ++a) {
            for (double fraction : series.fractions) {
                imaging::SampleLabel label{series.flavor, fraction, 0};
                std::string name = label.to_string();
                if (cfg.acquisitions > 1) name += "_a" + std::to_string(a);
                out.push_back({std::move(name), f});
            }
        }
    }
    return out;
}

std::vector<imaging::TransmittanceImage> normalize_all(const PipelineConfig& cfg, const StackSet& set) {
    std::vector<imaging::TransmittanceImage> images;
    images.reserve(set.stacks.size());
    for (const auto& s : set.stacks) images.push_back(imaging::normalize(s, cfg.normalize));
    return images;
}

int flavor_id(const PipelineConfig& cfg, const std::string& flavor) {
    const auto& names = cfg.experiment.flavors;
    const auto it = std::find(names.begin(), names.end(), flavor);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

template <class Fn>
void write_file(const fs::path& path, Fn&& body) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    body(out);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

}  // namespace

StackSet simulate_stacks(const PipelineConfig& cfg, std::uint64_t seed) {
    StackSet set;
    for (const auto& info : stack_layout(cfg)) set.names.push_back(info.name);
    std::uint64_t group = 0;
    for (std::size_t f = 0; f < cfg.photonics.flavors.size(); ++f) {
        const auto series = config::series_for(cfg, f);
        for (int a = 0; a < cfg.acquisitions; ++a, ++group) {
            const photonics::NoiseSpec noise{cfg.sigma_read, seed + kSeriesSeedStride * group};
            auto stacks = photonics::simulate_acquisition(series, cfg.geometry, cfg.illumination, noise);
            std::move(stacks.begin(), stacks.end(), std::back_inserter(set.stacks));
        }
    }
    return set;
}

std::vector<imaging::Patch> build_patches(const PipelineConfig& cfg,
                                          const std::vector<imaging::TransmittanceImage>& images) {
    const imaging::RoiSize roi{cfg.roi_mm, cfg.roi_mm};
    std::vector<imaging::Patch> patches;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const int fid = flavor_id(cfg, images[i].label.flavor);
        if (fid < 0) continue;
        const auto crop = imaging::center_roi(images[i], roi, cfg.geometry.mm_per_pixel);
        auto extracted = imaging::extract_patches(crop, cfg.patches_per_stack, imaging::kPatchSize,
                                                  cfg.seeds.patches + i, fid);
        std::move(extracted.begin(), extracted.end(), std::back_inserter(patches));
    }
    return patches;
}

nn::Batch pretrain_corpus(const PipelineConfig& cfg) {
    const StackSet set = simulate_stacks(cfg, cfg.seeds.pretrain);
    const auto images = normalize_all(cfg, set);
    const imaging::RoiSize roi{cfg.roi_mm, cfg.roi_mm};
    const double t_max = cfg.normalize.t_max;

    std::vector<imaging::Patch> patches;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto crop = imaging::center_roi(images[i], roi, cfg.geometry.mm_per_pixel);
        auto extracted = imaging::extract_patches(crop, cfg.pretrain.patches_per_stack, imaging::kPatchSize,
                                                  cfg.seeds.pretrain + kCorpusPatchSeedOffset + i);
        std::move(extracted.begin(), extracted.end(), std::back_inserter(patches));
    }

    std::mt19937_64 rng(cfg.seeds.pretrain + kCorpusNoiseSeedOffset);
    std::normal_distribution<double> noise(0.0, 1.0);
    nn::Batch corpus;
    corpus.inputs.resize(static_cast<Eigen::Index>(imaging::kPatchValues), static_cast<Eigen::Index>(patches.size()));
    for (std::size_t j = 0; j < patches.size(); ++j) {
        for (std::size_t k = 0; k < imaging::kPatchValues; ++k) {
            double r = 1.0 - static_cast<double>(patches[j].pixels[k]);
            if (cfg.pretrain.noise > 0.0) r += cfg.pretrain.noise * noise(rng);
            corpus.inputs(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
                std::clamp(r, 0.0, t_max) / t_max;
        }
    }
    return corpus;
}

nn::TrainResult pretrain(const PipelineConfig& cfg) {
    nn::Architecture arch;
    arch.input_dim = static_cast<Eigen::Index>(imaging::kPatchValues);
    arch.encoder_widths = cfg.encoder_widths;
    arch.classes = static_cast<Eigen::Index>(cfg.photonics.fractions.size());
    nn::TrainConfig train = cfg.pretrain.train;
    train.seed = cfg.seeds.pretrain;
    train.phase = nn::Phase::pretrain;
    return nn::train(nn::init_network(arch, cfg.seeds.init), pretrain_corpus(cfg), train);
}

std::vector<experiment::RunSpec> run_specs(const PipelineConfig& cfg) {
    std::vector<experiment::RunSpec> specs;
    for (const auto& r : cfg.experiment.runs) {
        experiment::RunSpec spec;
        spec.run_id = r.id;
        spec.seed = r.seed;
        spec.cfg = cfg.finetune;
        spec.cfg.seed = r.seed;
        spec.cfg.phase = nn::Phase::finetune;
        specs.push_back(std::move(spec));
    }
    std::sort(specs.begin(), specs.end(), [](const auto& a, const auto& b) { return a.run_id < b.run_id; });
    return specs;
}

experiment::ProtocolOptions protocol_options(const PipelineConfig& cfg) {
    experiment::ProtocolOptions opts;
    opts.flavor_names = cfg.experiment.flavors;
    opts.train_fraction = cfg.experiment.train_fraction;
    opts.t_max = cfg.normalize.t_max;
    return opts;
}

namespace {

struct Context {
    PipelineConfig cfg;
    bool has_config = false;
    fs::path out;
    bool quiet = false;
    std::ostream* log = nullptr;
    std::ostream* err = nullptr;

    std::ostream& info() {
        static std::ostream null_stream(nullptr);
        return quiet ? null_stream : *log;
    }
    fs::path stack_dir(const std::string& name) const { return out / "stacks" / name; }
    fs::path patches_file() const { return out / "patches.bin"; }
    fs::path pretrained_file() const { return out / "pretrained.net"; }
    fs::path run_dir(const std::string& id) const { return out / "runs" / id; }
};

void ensure_output_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw ConfigError("output directory " + dir.string() + " cannot be created: " +
                          (ec ? ec.message() : "not a directory"));
    }
    const fs::path probe = dir / ".puree-write-probe";
    {
        std::ofstream f(probe);
        if (!f) throw ConfigError("output directory " + dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
}

Context prepare(const CommandOptions& opts, std::ostream& log, std::ostream& err, bool config_required) {
    Context ctx;
    ctx.quiet = opts.quiet;
    ctx.log = &log;
    ctx.err = &err;
    if (opts.config) {
        ctx.cfg = config::load_config(*opts.config);
        ctx.has_config = true;
        if (opts.seed) config::override_seed(ctx.cfg, *opts.seed);
    } else if (config_required) {
        throw ConfigError("--config <path> is required");
    }
    ctx.out = opts.out ? *opts.out : (ctx.has_config ? ctx.cfg.output_dir : fs::path("."));
    ensure_output_dir(ctx.out);
    return ctx;
}

void stage_simulate(Context& ctx) {
    const StackSet set = simulate_stacks(ctx.cfg, ctx.cfg.seeds.simulate);
    for (std::size_t i = 0; i < set.stacks.size(); ++i) {
        formats::write_stack(ctx.stack_dir(set.names[i]), set.stacks[i]);
    }
    ctx.info() << "simulate: wrote " << set.stacks.size() << " stacks to " << (ctx.out / "stacks").string() << '\n';
}

void stage_normalize(Context& ctx) {
    std::size_t count = 0;
    for (const auto& info : stack_layout(ctx.cfg)) {
        const fs::path dir = ctx.stack_dir(info.name);
        const auto stack = formats::read_stack(dir);
        const auto t = imaging::normalize(stack, ctx.cfg.normalize);
        if (t.warning) *ctx.err << "warning: " << *t.warning << '\n';
        write_file(dir / "transmittance.praw", [&](std::ostream& o) { formats::write_transmittance(o, t); });
        ++count;
    }
    ctx.info() << "normalize: wrote " << count << " transmittance images\n";
}

imaging::TransmittanceImage load_transmittance(const fs::path& file, double* mm_per_pixel) {
    auto in = open_input(file);
    auto img = formats::read_transmittance(in);
    double pitch = 0.0;
    if (formats::read_label(file.parent_path(), img.label, pitch)) {
        if (mm_per_pixel) *mm_per_pixel = pitch;
    } else {
        img.label.flavor = file.parent_path().filename().string() + "_" + file.stem().string();
        img.label.fraction = 1.0;
        if (mm_per_pixel) *mm_per_pixel = 0.0;
    }
    return img;
}

void stage_patch(Context& ctx) {
    std::vector<imaging::TransmittanceImage> images;
    for (const auto& info : stack_layout(ctx.cfg)) {
        images.push_back(load_transmittance(ctx.stack_dir(info.name) / "transmittance.praw", nullptr));
    }
    const auto patches = build_patches(ctx.cfg, images);
    write_file(ctx.patches_file(), [&](std::ostream& o) { formats::write_patches(o, patches); });
    ctx.info() << "patch: wrote " << patches.size() << " patches to " << ctx.patches_file().string() << '\n';
}

void stage_pretrain(Context& ctx) {
    const auto result = pretrain(ctx.cfg);
    write_file(ctx.pretrained_file(), [&](std::ostream& o) { nn::write_checkpoint(o, result.params); });
    write_file(ctx.out / "loss_pretrain.csv",
               [&](std::ostream& o) { nn::write_loss_history(o, nn::Phase::pretrain, result.loss_history); });
    ctx.info() << "pretrain: " << result.loss_history.size() << " epochs, final loss "
               << csv::number(result.loss_history.back()) << '\n';
}

std::vector<imaging::Patch> load_patches(const Context& ctx) {
    auto in = open_input(ctx.patches_file());
    return formats::read_patches(in);
}

nn::NetworkParams load_net(const fs::path& path) {
    auto in = open_input(path);
    return nn::read_checkpoint(in);
}

void stage_finetune(Context& ctx) {
    const auto patches = load_patches(ctx);
    const auto pretrained = load_net(ctx.pretrained_file());
    const auto opts = protocol_options(ctx.cfg);
    for (const auto& spec : run_specs(ctx.cfg)) {
        nn::TrainResult result;
        try {
            result = experiment::finetune_once(patches, pretrained, spec, opts);
        } catch (const std::exception& e) {
            throw std::runtime_error("run " + spec.run_id + ": " + e.what());
        }
        const fs::path dir = ctx.run_dir(spec.run_id);
        write_file(dir / "finetuned.net", [&](std::ostream& o) { nn::write_checkpoint(o, result.params); });
        write_file(dir / "loss.csv",
                   [&](std::ostream& o) { nn::write_loss_history(o, nn::Phase::finetune, result.loss_history); });
        ctx.info() << "finetune: run " << spec.run_id << " final loss " << csv::number(result.loss_history.back())
                   << '\n';
    }
}

void stage_eval(Context& ctx) {
    const auto patches = load_patches(ctx);
    const auto opts = protocol_options(ctx.cfg);
    experiment::AccuracyReport report;
    for (const auto& spec : run_specs(ctx.cfg)) {
        const auto net = load_net(ctx.run_dir(spec.run_id) / "finetuned.net");
        const auto split = experiment::split_dataset(patches, opts.train_fraction, spec.seed);
        experiment::RunResult run;
        run.run_id = spec.run_id;
        run.seed = spec.seed;
        run.groups = experiment::evaluate(net, patches, split.test, opts);
        report.runs.push_back(std::move(run));
    }
    for (const auto& g : report.runs.front().groups) report.groups.push_back(g.group);

    write_file(ctx.out / "report.csv", [&](std::ostream& o) { experiment::write_report_csv(o, report); });
    write_file(ctx.out / "summary.csv", [&](std::ostream& o) { experiment::write_summary_csv(o, report); });
    ctx.info() << experiment::format_table(report);
}

std::string safe_name(std::string s) {
    for (char& c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) c = '_';
    }
    return s;
}

void stage_analyze(Context& ctx, const std::vector<fs::path>& inputs) {
    if (inputs.empty()) throw ConfigError("analyze needs at least one transmittance file");
    const double roi_mm = ctx.has_config ? ctx.cfg.roi_mm : 35.0;
    const fs::path dir = ctx.out / "analysis";

    std::vector<color::LabDistribution> distributions;
    for (const auto& file : inputs) {
        double pitch = 0.0;
        auto img = load_transmittance(file, &pitch);
        if (pitch > 0.0) img = imaging::center_roi(img, {roi_mm, roi_mm}, pitch);

        std::vector<color::LabColor> pixels;
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                if (!img.valid(x, y)) continue;
                const auto unit = [&](int c) { return std::clamp(img.at(x, y, c), 0.0, 1.0); };
                pixels.push_back(color::linear_rgb_to_lab({unit(0), unit(1), unit(2)}));
            }
        }
        const std::string label = img.label.to_string();
        distributions.push_back(color::lab_distribution(pixels, label));

        const auto map = imaging::transmittance_map(img, 0);
        write_file(dir / "maps" / (safe_name(label) + "_map.csv"),
                   [&](std::ostream& o) { formats::write_map_csv(o, map); });
        write_file(dir / "maps" / (safe_name(label) + "_profile.csv"),
                   [&](std::ostream& o) { formats::write_profile_csv(o, map); });
    }
    write_file(dir / "lab_distributions.csv",
               [&](std::ostream& o) { color::write_distribution_csv(o, distributions); });
    write_file(dir / "lab_ab_normalized.csv", [&](std::ostream& o) {
        o << "label,a_over_L,b_over_L,cov_aa,cov_ab,cov_bb\n";
        for (const auto& d : distributions) {
            const auto n = color::l_normalized_ab(d);
            o << d.label;
            for (double v : {n.mean(0), n.mean(1), n.covariance(0, 0), n.covariance(0, 1), n.covariance(1, 1)}) {
                o << ',' << csv::number(v);
            }
            o << '\n';
        }
    });
    ctx.info() << "analyze: " << distributions.size() << " distributions written to " << dir.string() << '\n';
}

// Runs one stage, mapping exceptions to exit codes and naming the stage.
template <class Fn>
int guarded(std::string_view stage, std::ostream& err, Fn&& fn) {
    try {
        fn();
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "puree " << stage << ": invalid configuration: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "puree " << stage << ": failed: " << e.what() << '\n';
        return kExitFailure;
    }
}

template <class Stage>
int single(std::string_view name, const CommandOptions& opts, std::ostream& log, std::ostream& err,
           Stage&& stage, bool config_required = true) {
    Context ctx;
    if (const int rc = guarded("config", err, [&] { ctx = prepare(opts, log, err, config_required); }); rc != 0) {
        return rc;
    }
    return guarded(name, err, [&] { stage(ctx); });
}

}  // namespace

int cmd_simulate(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
    return single("simulate", opts, log, err, stage_simulate);
}

int cmd_normalize(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
    return single("normalize", opts, log, err, stage_normalize);
}

int cmd_patch(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
    return single("patch", opts, log, err, stage_patch);
}

int cmd_pretrain(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
    return single("pretrain", opts, log, err, stage_pretrain);
}

int cmd_finetune(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
    return single("finetune", opts, log, err, stage_finetune);
}

int cmd_eval(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
    return single("eval", opts, log, err, stage_eval);
}

int cmd_analyze(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
    if (opts.inputs.empty()) {
        err << "puree analyze: invalid configuration: at least one transmittance file is required\n";
        return kExitConfig;
    }
    return single("analyze", opts, log, err, [&](Context& ctx) { stage_analyze(ctx, opts.inputs); }, false);
}

int cmd_run(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
    Context ctx;
    if (const int rc = guarded("config", err, [&] { ctx = prepare(opts, log, err, true); }); rc != 0) return rc;
    const std::pair<std::string_view, void (*)(Context&)> stages[] = {
        {"simulate", stage_simulate}, {"normalize", stage_normalize}, {"patch", stage_patch},
        {"pretrain", stage_pretrain}, {"finetune", stage_finetune},   {"eval", stage_eval},
    };
    for (const auto& [name, stage] : stages) {
        if (const int rc = guarded(name, err, [&] { stage(ctx); }); rc != 0) return rc;
    }
    return guarded("analyze", err, [&] {
        std::vector<fs::path> inputs;
        for (const auto& info : stack_layout(ctx.cfg)) inputs.push_back(ctx.stack_dir(info.name) / "transmittance.praw");
        stage_analyze(ctx, inputs);
    });
}

int run_command(std::string_view name, const CommandOptions& opts, std::ostream& log, std::ostream& err) {
    using Command = int (*)(const CommandOptions&, std::ostream&, std::ostream&);
    const std::pair<std::string_view, Command> commands[] = {
        {"simulate", cmd_simulate}, {"normalize", cmd_normalize}, {"patch", cmd_patch},
        {"pretrain", cmd_pretrain}, {"finetune", cmd_finetune},   {"eval", cmd_eval},
        {"analyze", cmd_analyze},   {"run", cmd_run},
    };
    for (const auto& [n, fn] : commands) {
        if (n == name) return fn(opts, log, err);
    }
    err << "puree: unknown command '" << name << "'\n";
    return kExitConfig;
}

}  // namespace puree::pipeline

// puree: batch pipeline for simulated puree transmittance imaging.
//
//   puree <simulate|normalize|patch|pretrain|finetune|eval|run> --config cfg.json [--out dir] [--seed n] [--quiet]
//   puree analyze [--config cfg.json] [--out dir] transmittance.praw...

#include "puree/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    namespace pl = puree::pipeline;

    CLI::App app{"Simulated puree transmittance imaging and dilution classification"};
    app.require_subcommand(1);

    pl::CommandOptions opts;
    std::string config;
    std::string out;
    std::uint64_t seed = 0;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config, "pipeline config (JSON)");
        cmd->add_option("--out", out, "output directory (overrides output_dir)");
        cmd->add_option("--seed", seed, "replace every configured seed");
        cmd->add_flag("--quiet", opts.quiet, "suppress progress and tables");
    };

    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "synthesize raw acquisition stacks"},
        {"normalize", "white/dark normalize stacks into transmittance images"},
        {"patch", "extract the 25x50 patch dataset"},
        {"pretrain", "pretrain the autoencoder on the reflectance-like corpus"},
        {"finetune", "fine-tune one network per configured run"},
        {"eval", "evaluate fine-tuned networks and write the accuracy report"},
        {"analyze", "CIELAB distributions and % transmittance maps"},
        {"run", "every stage in order"},
    };
    std::vector<std::string> inputs;
    for (const auto& [name, help] : commands) {
        CLI::App* cmd = app.add_subcommand(name, help);
        add_common(cmd);
        if (std::string_view(name) == "analyze") {
            cmd->add_option("inputs", inputs, "transmittance .praw files");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : pl::kExitConfig;
    }

    CLI::App* chosen = app.get_subcommands().front();
    if (!config.empty()) opts.config = config;
    if (!out.empty()) opts.out = out;
    if (chosen->count("--seed") > 0) opts.seed = seed;
    for (const auto& in : inputs) opts.inputs.emplace_back(in);

    return pl::run_command(chosen->get_name(), opts, std::cout, std::cerr);
}

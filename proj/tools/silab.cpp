// silab: command-line front end for the scale-invariant training laboratory.
//
//   silab verify       [--config c.json] [--seed N] [--out DIR]
//   silab run NAME     [--config c.json] [--seed N] [--out DIR] [--trials N]
//   silab export-plots RESULTS_DIR
//
// Exit codes: 0 all assertions pass, 1 assertion failure, 2 usage/config error.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "silab/experiments.hpp"

namespace {

silab::ExperimentConfig load_config(const std::string& config_path, std::uint64_t seed,
                                    bool seed_set, const std::string& out, bool out_set,
                                    std::size_t trials, bool trials_set) {
    silab::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = silab::ExperimentConfig::from_file(config_path);
    if (seed_set) cfg.seed = seed;
    if (out_set) cfg.out = out;
    if (trials_set) cfg.trials = trials;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scale-invariant SGD laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out;
    std::size_t trials = 0;
    bool seed_set = false, out_set = false, trials_set = false;

    const auto add_common = [&](CLI::App* sub, bool with_trials) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--seed", seed, "global seed override")->each([&](const std::string&) {
            seed_set = true;
        });
        sub->add_option("--out", out, "output directory override")->each([&](const std::string&) {
            out_set = true;
        });
        if (with_trials)
            sub->add_option("--trials", trials, "trial count override")
                ->each([&](const std::string&) { trials_set = true; });
    };

    CLI::App* verify = app.add_subcommand("verify", "run the invariance property suites");
    add_common(verify, false);

    std::string experiment_name;
    CLI::App* run = app.add_subcommand("run", "run a registered experiment");
    run->add_option("name", experiment_name, "experiment name")->required();
    add_common(run, true);

    std::string results_dir;
    CLI::App* export_plots =
        app.add_subcommand("export-plots", "emit plot-ready long-format CSVs");
    export_plots->add_option("results_dir", results_dir, "directory with experiment results")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (verify->parsed()) {
            const auto cfg =
                load_config(config_path, seed, seed_set, out, out_set, trials, trials_set);
            return silab::cmd_verify(cfg);
        }
        if (run->parsed()) {
            const auto cfg =
                load_config(config_path, seed, seed_set, out, out_set, trials, trials_set);
            return silab::cmd_run(experiment_name, cfg);
        }
        if (export_plots->parsed()) return silab::cmd_export_plots(results_dir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}

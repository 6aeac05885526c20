#include "common.hpp"
#include "gda/pipeline/pipeline.hpp"

#include <cstdio>
#include <iostream>

using namespace gda;

int main(int argc, char** argv) {
    CLI::App app{"end-to-end attribution pipeline: real data -> generators -> reports"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run the staged pipeline into a run directory");
    std::string config_path, out_dir = "run", stage;
    bool smoke = false, deterministic = false, quiet = false;
    run->add_option("--config", config_path, "experiment config (JSON); default: desk profile");
    run->add_option("--out", out_dir, "run directory")->required();
    run->add_option("--stage", stage, "run a single stage (prerequisites must be complete)");
    run->add_flag("--smoke", smoke, "minutes-scale CI profile (overrides --config)");
    run->add_flag("--deterministic", deterministic, "single-threaded strict bit-equality mode");
    run->add_flag("--quiet", quiet, "suppress progress output");

    auto* config = app.add_subcommand("config", "write a profile config file");
    std::string profile = "desk", config_out = "config.json";
    config->add_option("--profile", profile, "desk|smoke");
    config->add_option("--out", config_out, "output path");

    CLI11_PARSE(app, argc, argv);

    if (config->parsed()) {
        return cli::guarded_main([&]() {
            pipe::ExperimentConfig cfg = profile == "smoke" ? pipe::ExperimentConfig::smoke()
                                                            : pipe::ExperimentConfig::desk();
            cfg.save(config_out);
            std::printf("wrote %s profile to %s\n", profile.c_str(), config_out.c_str());
            return 0;
        });
    }

    try {
        pipe::ExperimentConfig cfg;
        if (smoke) {
            if (!config_path.empty())
                std::cerr << "note: --smoke overrides --config " << config_path << "\n";
            cfg = pipe::ExperimentConfig::smoke();
        } else if (!config_path.empty()) {
            cfg = pipe::ExperimentConfig::load(config_path);
        } else {
            cfg = pipe::ExperimentConfig::desk();
        }
        pipe::RunOptions opts;
        if (!stage.empty()) opts.only_stage = stage;
        opts.deterministic = deterministic;
        opts.verbose = !quiet;
        pipe::run_pipeline(cfg, out_dir, opts);
        std::printf("run complete: %s\n", out_dir.c_str());
        return 0;
    } catch (const pipe::ConfigError& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return 2;
    } catch (const pipe::StageError& ex) {
        std::cerr << ex.what() << "\n";
        return 3;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 3;
    }
}

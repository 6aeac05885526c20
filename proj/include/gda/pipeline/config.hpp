#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gda/clf/classifier.hpp"
#include "gda/dae/dae.hpp"
#include "gda/eval/experiments.hpp"
#include "gda/fen/fen.hpp"
#include "gda/ganzoo/ganzoo.hpp"

namespace gda::pipe {

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Declarative experiment description; a run is reproducible from this plus
// the real-image folder (fixed thread count).
struct ExperimentConfig {
    static constexpr int kSchemaVersion = 1;

    std::string name = "desk";
    uint64_t determinism_seed = 17;
    int threads = 0; // 0 = hardware concurrency
    int height = 32, width = 32, channels = 3;

    struct DataCfg {
        std::string real_dir;     // empty -> synthesize into the run dir
        int synth_count = 5600;   // only used when synthesizing
        int per_seed_images = 1000;
        int crossseed_images = 800;
        int finetune_images = 800;
        int real_train = 3200;
        int real_closed = 800;
        int real_crossseed = 800;
        int real_finetune = 800;
        double closed_test_fraction = 0.2;
    } data;

    std::vector<ganzoo::GeneratorFamily> families;
    std::vector<int> train_seeds = {1, 2, 3, 4};
    int crossseed_seed = 5;
    std::vector<std::string> finetune_families = {"dcgan", "wgan", "sngan"};
    int finetune_extra_epochs = 10;

    dae::DaeConfig dae;
    fen::FenConfig fen;
    fen::FenVariant fen_variant = fen::FenVariant::denoiser;
    clf::ClfConfig clf;
    eval::SimpleCnnConfig cnn; // ablation legs

    bool run_ablation = false;
    bool tsne_export = true;

    void validate() const;
    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& text);
    void save(const std::string& path) const;
    static ExperimentConfig load(const std::string& path);

    // Profiles: full desk-scale experiment and the minutes-scale CI run
    // (one family pair, two seeds, short epochs).
    static ExperimentConfig desk();
    static ExperimentConfig smoke();
};

} // namespace gda::pipe

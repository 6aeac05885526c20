#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gda/core/rng.hpp"
#include "gda/core/tensor.hpp"
#include "gda/nn/net.hpp"

namespace gda::ganzoo {

enum class GenArch { tconv, nn_residual };
enum class GanLoss { bce, wasserstein, hinge_sn };

std::string to_string(GenArch a);
std::string to_string(GanLoss l);
GenArch arch_from_string(const std::string& s);
GanLoss loss_from_string(const std::string& s);

struct GanTrainConfig {
    int epochs = 30;
    int batch = 128;
    int zdim = 64;
    float lr_g = 2e-4f;
    float lr_d = 2e-4f;
    float beta1 = 0.5f; // Adam regimes
    int n_critic = 1;
    float clip = 0.05f;         // Wasserstein weight clipping
    float collapse_std = 0.01f; // min std of per-image means over a 256 sample batch
};

// One architecture recipe. The four defaults are pairwise distinct in
// upsampling scheme, weight normalization, or adversarial loss.
struct GeneratorFamily {
    std::string family_id;
    GenArch arch = GenArch::tconv;
    GanLoss loss = GanLoss::bce;
    GanTrainConfig train;

    nn::Net build_generator(Rng& rng) const;
    nn::Net build_discriminator(Rng& rng) const;
};

std::vector<GeneratorFamily> default_families();
const GeneratorFamily& family_by_id(const std::vector<GeneratorFamily>& families,
                                    const std::string& id);
void check_pairwise_distinct(const std::vector<GeneratorFamily>& families);

struct GeneratorInstance {
    std::string family_id;
    int seed = 0;
    int epochs_trained = 0;
    std::string checkpoint_path;
    std::string training_fingerprint; // digest of (family, seed, epochs, config)
    uint64_t weight_digest = 0;
};

// Trains one seed-controlled instance. real_images is (N,3,H,W) in [0,1];
// sample order is derived from the instance seed, so identical inputs give
// identical checkpoints (fixed thread count).
GeneratorInstance train_instance(const GeneratorFamily& family, int seed,
                                 const Tensor& real_images, const std::string& out_ckpt,
                                 bool verbose = false);

// Resumes training for extra_epochs on the same real data; the source
// checkpoint is left untouched.
GeneratorInstance fine_tune_instance(const std::string& ckpt_path, int extra_epochs,
                                     const Tensor& real_images, const std::string& out_ckpt,
                                     bool verbose = false);

struct LoadedInstance {
    GeneratorFamily family;
    nn::Net generator;
    nn::Net discriminator;
    int seed = 0;
    int epochs_trained = 0;
    std::string meta_json;
};

LoadedInstance load_instance(const std::string& ckpt_path);
GeneratorInstance instance_info(const std::string& ckpt_path);

// n generated images (n,3,H,W) in [0,1], deterministic in noise_seed.
Tensor sample_batch(LoadedInstance& inst, int n, uint64_t noise_seed);
Tensor sample_batch(const std::string& ckpt_path, int n, uint64_t noise_seed);

// Writes n PNGs plus the provenance sidecar index into out_dir.
void sample_images(const std::string& ckpt_path, int n, uint64_t noise_seed,
                   const std::string& out_dir);

// Collapse metric: std dev of per-image pixel means across a batch.
float sample_diversity(LoadedInstance& inst, int n, uint64_t noise_seed);

} // namespace gda::ganzoo

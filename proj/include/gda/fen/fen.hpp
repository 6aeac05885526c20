#pragma once

#include <string>
#include <utility>

#include "gda/data/manifest.hpp"
#include "gda/fen/supcon.hpp"
#include "gda/nn/net.hpp"

namespace gda::fen {

enum class FenVariant { vanilla, denoiser };

std::string to_string(FenVariant v);
FenVariant variant_from_string(const std::string& s);

inline constexpr int kClassEmbedDim = 2048;
inline constexpr int kProjEmbedDim = 128;

struct FenConfig {
    int epochs = 40;
    int batch_sources = 128; // 2 views each -> 256 embeddings per batch
    float lr = 0.003f;       // SGD
    float momentum = 0.9f;
    bool cosine_decay = true;
    float tau = 0.07f;
    int crop_pad = 4; // random crop padding; 0 disables
    bool flip = true;
    SupConReduction reduction = SupConReduction::mean_over_anchors;
    uint64_t seed = 1;
};

// Tagged input so a residual map cannot be fed to a vanilla model or vice
// versa.
struct FenInput {
    Tensor x; // (N,C,H,W): images for vanilla, residual maps for denoiser
    bool is_residual = false;
};

struct FenModel {
    FenVariant variant = FenVariant::vanilla;
    nn::Net encoder;    // image -> (N, 2048)
    nn::Net projection; // (N, 2048) -> unit-norm (N, 128)
    int height = 32, width = 32, channels = 3;
    FenConfig config;
    std::vector<float> loss_curve;

    // Eval-mode embeddings: (class_embed (N,2048), proj_embed (N,128)).
    // Throws when the input tag does not match the variant.
    std::pair<Tensor, Tensor> forward(const FenInput& input);

    void save(const std::string& path) const;
    static FenModel load(const std::string& path);
};

nn::Net build_fen_encoder(int channels, Rng& rng);
nn::Net build_fen_projection(Rng& rng);

// Supervised-contrastive training over two augmented views per source.
// For the denoiser variant, train.x must already hold residual maps
// (computed for every sample, real ones included).
FenModel train_fen(const data::SampleSet& train, FenVariant variant, const FenConfig& cfg,
                   int num_classes, bool verbose = false);

} // namespace gda::fen

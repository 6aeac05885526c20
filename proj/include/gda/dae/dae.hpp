#pragma once

#include <string>

#include "gda/core/rng.hpp"
#include "gda/data/manifest.hpp"
#include "gda/nn/net.hpp"

namespace gda::dae {

struct DaeConfig {
    int epochs = 40;
    int batch = 128;
    float lr = 1e-4f;
    float noise_sigma = 0.1f;    // additive Gaussian corruption, [0,1] scale
    float target_mae = 0.05f;    // held-out reconstruction bound
    int plateau_patience = 5;
    float min_improvement = 1e-4f;
    uint64_t seed = 1;
};

// Denoising autoencoder trained on real images only. The decoder ends in a
// sigmoid, so reconstructions live in [0,1] by construction.
struct DaeModel {
    nn::Net net;
    int height = 32, width = 32, channels = 3;
    DaeConfig config;
    float final_train_mae = 0.0f;
    float holdout_mae = 0.0f;
    int64_t fake_samples_seen = 0; // must stay 0

    void save(const std::string& path) const;
    static DaeModel load(const std::string& path);
};

// |X - h(X)| with the source provenance carried along.
struct ResidualMap {
    Tensor values;
    data::Provenance source_provenance;
};

nn::Net build_dae_net(int channels, Rng& rng);

// Trains on the real-only stream; throws if a non-real sample is present,
// if training diverges, or if the held-out MAE bound is missed.
DaeModel train_dae(const data::SampleSet& real_train, const data::SampleSet& real_holdout,
                   const DaeConfig& cfg, bool verbose = false);

// Deterministic inference; no corruption is applied.
Tensor reconstruct(DaeModel& model, const Tensor& x);

// Elementwise |x - reconstruct(x)| over a batch.
Tensor residual_batch(DaeModel& model, const Tensor& x);

ResidualMap residual(DaeModel& model, const Tensor& single_image,
                     const data::Provenance& prov);

} // namespace gda::dae

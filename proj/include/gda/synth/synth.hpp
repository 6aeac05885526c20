#pragma once

#include <cstdint>
#include <string>

#include "gda/core/image.hpp"
#include "gda/core/rng.hpp"

namespace gda::synth {

// Procedural stand-in for a CelebA-like folder: smooth face-ish scenes with
// enough structure and variety for the autoencoder and the generators to
// have something real to fit. Any folder of 32x32 PNGs can replace it.
struct SynthConfig {
    int count = 6000;
    int height = 32;
    int width = 32;
    uint64_t seed = 7;
};

Image synth_face(Rng& rng, int h, int w);

// Writes <out_dir>/real_%06d.png plus provenance.jsonl.
void generate_corpus(const std::string& out_dir, const SynthConfig& cfg);

} // namespace gda::synth

#pragma once

#include <string>
#include <vector>

#include "gda/data/provenance.hpp"
#include "gda/nn/net.hpp"

namespace gda::clf {

struct ClfConfig {
    int epochs = 50;
    int batch = 256;
    float lr = 3e-5f; // Adam
    uint64_t seed = 1;
};

// 4-layer fully connected attribution head on frozen 2048-dim embeddings:
// 2048 -> 128 -> 64 -> 16 -> |Y|, ReLU inside, softmax at prediction.
struct AttributionClassifier {
    nn::Net net;
    data::LabelSpace label_space;
    ClfConfig config;
    float train_accuracy = 0.0f;

    void save(const std::string& path) const;
    static AttributionClassifier load(const std::string& path);
};

struct Prediction {
    int label = -1;
    std::vector<float> probs;
};

nn::Net build_classifier_net(int num_classes, Rng& rng);

// embeddings: (N, 2048) from a frozen FEN; labels are LabelSpace indices.
// Every class must be present in the stream.
AttributionClassifier train_classifier(const Tensor& embeddings, const std::vector<int>& labels,
                                       const data::LabelSpace& label_space, const ClfConfig& cfg,
                                       bool verbose = false);

Prediction predict(AttributionClassifier& clf, const Tensor& single_embedding);

// Batched argmax predictions; probs (N,K) optionally returned.
std::vector<int> predict_batch(AttributionClassifier& clf, const Tensor& embeddings,
                               Tensor* probs_out = nullptr);

} // namespace gda::clf

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gda/clf/classifier.hpp"
#include "gda/dae/dae.hpp"
#include "gda/eval/metrics.hpp"
#include "gda/eval/tsne.hpp"
#include "gda/fen/fen.hpp"

namespace gda::eval {

// ---- pipeline composition ------------------------------------------------

// f = predict . forward (. residual for the denoiser variant).
// dae may be null only for the vanilla variant.
PipelineFn make_gda_pipeline(dae::DaeModel* dae, fen::FenModel& fen,
                             clf::AttributionClassifier& clf);

struct EmbeddedSet {
    Tensor class_embed; // (N, 2048)
    Tensor proj_embed;  // (N, 128), unit rows
    std::vector<int> labels;
    std::vector<const data::ManifestEntry*> entries;
};

EmbeddedSet embed_samples(fen::FenModel& fen, dae::DaeModel* dae, const data::SampleSet& samples);

// Embedding archive rows: (provenance, 2048-vec, 128-vec).
void save_embeddings(const std::string& path, const EmbeddedSet& set,
                     const data::LabelSpace& labels);
struct LoadedEmbeddings {
    Tensor class_embed;
    Tensor proj_embed;
    std::vector<int> labels;
    data::LabelSpace label_space;
    std::vector<data::ManifestEntry> entries; // owned copies
};
LoadedEmbeddings load_embeddings(const std::string& path);

// ---- simple multiclass CNN (the no-FEN ablation legs) ---------------------

struct SimpleCnnConfig {
    int epochs = 25;
    int batch = 128;
    float lr = 1e-3f;
    uint64_t seed = 5;
};

struct SimpleCnnModel {
    nn::Net net;
    int num_classes = 0;
};

SimpleCnnModel train_simple_cnn(const data::SampleSet& train, int num_classes,
                                const SimpleCnnConfig& cfg, bool verbose = false);
std::vector<int> simple_cnn_predict(SimpleCnnModel& model, const Tensor& x);

// ---- GDA-Net assembly ------------------------------------------------------

struct GdaNet {
    fen::FenModel fen;
    clf::AttributionClassifier clf;
};

// Trains FEN (+ classifier on frozen embeddings) from the manifest train
// split, optionally restricted to one train seed per family. dae must be
// non-null for the denoiser variant.
GdaNet train_gda_net(const data::DatasetManifest& manifest, dae::DaeModel* dae,
                     fen::FenVariant variant, const fen::FenConfig& fen_cfg,
                     const clf::ClfConfig& clf_cfg, std::optional<int> only_seed,
                     bool verbose = false);

// ---- experiment suites -----------------------------------------------------

struct AblationConfig {
    SimpleCnnConfig cnn;
    fen::FenConfig fen;
    clf::ClfConfig clf;
    int single_seed = 1;
    bool verbose = false;
};

struct AblationLeg {
    std::string name;
    bool ok = false;
    std::string error;
    double closed_accuracy = 0.0;
    double cross_accuracy = 0.0;
    double cross_macro_f1 = 0.0;
};

struct AblationTable {
    std::vector<AblationLeg> legs; // fixed order: the five configurations
    std::string to_json() const;
    void save(const std::string& path) const;
};

// Table-1-style suite: single-seed+clf, single-seed+DAE+clf,
// multi-seed+DAE+clf, multi-seed+FEN+clf, multi-seed+DAE+FEN+clf.
// A failed leg is recorded, not fatal.
AblationTable ablation_suite(const data::DatasetManifest& manifest, dae::DaeModel& dae,
                             const AblationConfig& cfg);

struct FamilyAccuracy {
    std::string family;
    bool present = false;
    double accuracy = 0.0;
    int64_t support = 0;
};

// Cross-seed accuracy restricted per family (Table-4-style row).
std::vector<FamilyAccuracy> crossseed_per_family(const PipelineFn& pipeline,
                                                 const data::DatasetManifest& manifest);

struct FinetuneRow {
    std::string family;
    double accuracy_before = 0.0; // crossseed instance at epoch x
    double accuracy_after = 0.0;  // same instance at epoch x + extra
    double drop = 0.0;
};

// Table-2-style before/after table over families present in finetune_test.
std::vector<FinetuneRow> finetune_eval(const PipelineFn& pipeline,
                                       const data::DatasetManifest& manifest);

// Per-family k-NN label agreement between train and cross-seed projection
// embeddings (quantitative co-clustering check).
std::map<std::string, double> knn_family_agreement(const EmbeddedSet& train,
                                                   const EmbeddedSet& cross,
                                                   const data::LabelSpace& labels, int k = 5);

// t-SNE export over (subsampled) projection embeddings; writes point file
// and plot, returns silhouette of the 2-D output.
double export_tsne(const EmbeddedSet& set, const data::LabelSpace& labels,
                   const std::string& out_base, const TsneConfig& cfg, int max_points = 1500);

} // namespace gda::eval

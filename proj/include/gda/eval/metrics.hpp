#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gda/data/manifest.hpp"

namespace gda::eval {

enum class Regime { closed_set, cross_seed, finetune };

std::string to_string(Regime r);

struct ConfusionMatrix {
    int k = 0;
    std::vector<int64_t> counts; // row = true class, col = predicted

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int k_) : k(k_), counts(static_cast<size_t>(k_) * k_, 0) {}

    int64_t& at(int t, int p) { return counts[static_cast<size_t>(t) * k + p]; }
    int64_t at(int t, int p) const { return counts[static_cast<size_t>(t) * k + p]; }
    void add(int t, int p) { ++at(t, p); }

    int64_t total() const;
    int64_t trace() const;
    int64_t row_sum(int t) const;
    int64_t col_sum(int p) const;
};

struct PerClassMetrics {
    std::string cls;
    int64_t support = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvalReport {
    std::string regime;
    ConfusionMatrix confusion;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::vector<PerClassMetrics> per_class;
    std::vector<std::string> zero_support_classes; // excluded from macro F1
    std::vector<std::string> classes;
    std::string config_echo; // JSON text

    std::string to_json() const;
    void save(const std::string& path) const;
};

// accuracy = trace/total; macro F1 = unweighted mean of per-class F1 with
// zero-support classes excluded and flagged.
EvalReport report_from_confusion(const ConfusionMatrix& cm, const std::vector<std::string>& classes,
                                 const std::string& regime);

// Batched attribution function: image batch -> predicted label indices.
using PipelineFn = std::function<std::vector<int>(const Tensor& images)>;

// Evaluates on the manifest split matching the regime. Asserts regime
// isolation from provenance: closed_set sees only train seeds, cross_seed
// never sees a train seed, finetune sees only fine-tuned instances.
EvalReport evaluate(const PipelineFn& pipeline, const data::DatasetManifest& manifest,
                    Regime regime, int eval_batch = 512);

// Same metric path for pre-loaded samples (oracle tests, ablation legs).
EvalReport evaluate_samples(const PipelineFn& pipeline, const data::SampleSet& samples,
                            const std::vector<std::string>& classes, const std::string& regime,
                            int eval_batch = 512);

} // namespace gda::eval

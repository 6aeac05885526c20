#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gda/core/tensor.hpp"
#include "gda/data/provenance.hpp"

namespace gda::data {

struct ManifestEntry {
    std::string path; // relative to the manifest's base_dir when set
    Provenance prov;
    Split split = Split::train;
};

// How build_manifest assigns splits from provenance metadata. Never by
// directory convention.
struct SplitRules {
    std::vector<int> train_seeds = {1, 2, 3, 4};
    int crossseed_seed = 5;
    double closed_test_fraction = 0.2; // per (family, train seed)
    int real_train = 4000;
    int real_closed = 1000;
    int real_crossseed = 1000;
    int real_finetune = 1000;
    double balance_tolerance = 0.10;
    uint64_t shuffle_seed = 1;

    void validate() const;
};

struct DatasetManifest {
    static constexpr int kSchemaVersion = 1;

    LabelSpace label_space;
    int height = 32, width = 32, channels = 3;
    std::vector<ManifestEntry> entries;
    std::string base_dir; // directory entry paths are relative to

    std::string resolve_path(const ManifestEntry& e) const;

    // Checks every structural invariant: label space, provenance, seed
    // disjointness between train and crossseed_test, label clubbing, and
    // train class balance.
    void validate(double balance_tolerance = 0.10) const;

    // counts keyed by "<family>/<seed-or-->/<split>"
    std::map<std::string, int> counts() const;
    std::vector<int> train_seeds_of(const std::string& family) const;

    void save(const std::string& path) const;
    static DatasetManifest parse(const std::string& path);
};

// Scans image_root recursively for provenance.jsonl sidecar indexes, checks
// that every listed image exists with the declared shape, and assigns splits
// per rules. PNG files without a provenance record are rejected with a
// diagnostic on stderr; seed leakage is a hard error.
DatasetManifest build_manifest(const std::string& image_root, const SplitRules& rules);

struct QueryPredicate {
    std::optional<Split> split;
    std::optional<std::string> family;
    std::optional<std::string> label;
    std::optional<int> seed;
    std::optional<int> finetune_extra_epochs;

    bool matches(const ManifestEntry& e) const;
};

// Deterministic selection: manifest order, then an optional seeded shuffle.
// An empty result is not an error; a warning is emitted.
std::vector<const ManifestEntry*> query(const DatasetManifest& m, const QueryPredicate& pred,
                                        uint64_t shuffle_seed = 0);

// Pixel data for a selection, decoded once into memory.
struct SampleSet {
    Tensor x; // (N, C, H, W), values in [0,1]
    std::vector<int> labels;
    std::vector<const ManifestEntry*> entries;

    int size() const { return x.numel() ? x.dim(0) : 0; }
};

SampleSet load_samples(const DatasetManifest& m, const std::vector<const ManifestEntry*>& sel);

} // namespace gda::data

#include "gda/data/manifest.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "gda/core/image.hpp"
#include "gda/core/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gda::data {

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::closed_test: return "closed_test";
        case Split::crossseed_test: return "crossseed_test";
        case Split::finetune_test: return "finetune_test";
    }
    fail("unreachable split");
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "closed_test") return Split::closed_test;
    if (s == "crossseed_test") return Split::crossseed_test;
    if (s == "finetune_test") return Split::finetune_test;
    fail("unknown split '" + s + "'");
}

void SplitRules::validate() const {
    check(!train_seeds.empty(), "split rules: no train seeds");
    for (int s : train_seeds)
        check(s != crossseed_seed,
              "seed leakage: crossseed seed " + std::to_string(crossseed_seed) +
                  " also listed as a train seed");
    check(closed_test_fraction > 0.0 && closed_test_fraction < 1.0,
          "split rules: closed_test_fraction must be in (0,1)");
    check(real_train > 0, "split rules: real_train must be positive");
}

std::string DatasetManifest::resolve_path(const ManifestEntry& e) const {
    if (base_dir.empty() || fs::path(e.path).is_absolute()) return e.path;
    return (fs::path(base_dir) / e.path).string();
}

std::vector<int> DatasetManifest::train_seeds_of(const std::string& family) const {
    std::set<int> seeds;
    for (const auto& e : entries)
        if (e.split == Split::train && e.prov.family == family && e.prov.seed)
            seeds.insert(*e.prov.seed);
    return {seeds.begin(), seeds.end()};
}

void DatasetManifest::validate(double balance_tolerance) const {
    label_space.validate();
    check(!entries.empty(), "manifest: no entries");
    std::map<std::string, std::set<int>> train_seeds, cross_seeds;
    std::map<std::string, std::string> family_label;
    std::map<int, int64_t> train_class_counts;
    for (const auto& e : entries) {
        e.prov.validate();
        const int label_idx = label_space.index_of(e.prov.label);
        // label clubbing: one label per family regardless of seed
        auto it = family_label.find(e.prov.family);
        if (it == family_label.end())
            family_label[e.prov.family] = e.prov.label;
        else
            check(it->second == e.prov.label,
                  "manifest: family '" + e.prov.family + "' maps to multiple labels");
        if (e.prov.seed) {
            if (e.split == Split::train || e.split == Split::closed_test)
                train_seeds[e.prov.family].insert(*e.prov.seed);
            else if (e.split == Split::crossseed_test)
                cross_seeds[e.prov.family].insert(*e.prov.seed);
        }
        if (e.split == Split::train) ++train_class_counts[label_idx];
    }
    for (const auto& [family, cseeds] : cross_seeds) {
        const auto& tseeds = train_seeds[family];
        for (int s : cseeds)
            check(tseeds.count(s) == 0, "seed leakage: family '" + family + "' seed " +
                                            std::to_string(s) +
                                            " appears in both train and crossseed_test");
    }
    if (!train_class_counts.empty()) {
        int64_t mn = std::numeric_limits<int64_t>::max(), mx = 0;
        for (const auto& [cls, n] : train_class_counts) {
            mn = std::min(mn, n);
            mx = std::max(mx, n);
        }
        check(static_cast<double>(mx - mn) <= balance_tolerance * static_cast<double>(mx),
              "manifest: train class counts out of balance (min " + std::to_string(mn) +
                  ", max " + std::to_string(mx) + ")");
    }
}

std::map<std::string, int> DatasetManifest::counts() const {
    std::map<std::string, int> out;
    for (const auto& e : entries) {
        const std::string seed = e.prov.seed ? std::to_string(*e.prov.seed) : "-";
        ++out[e.prov.family + "/" + seed + "/" + to_string(e.split)];
    }
    return out;
}

namespace {

std::string opt_int_str(const std::optional<int>& v) {
    return v ? std::to_string(*v) : "-";
}

std::string opt_u64_str(const std::optional<uint64_t>& v) {
    return v ? std::to_string(*v) : "-";
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == '\t') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

void DatasetManifest::save(const std::string& path) const {
    std::ofstream f(path);
    check(f.good(), "manifest: cannot open for write: " + path);
    f << "#gda-manifest v" << kSchemaVersion << " h=" << height << " w=" << width
      << " c=" << channels << " classes=";
    for (size_t i = 0; i < label_space.classes.size(); ++i)
        f << (i ? "," : "") << label_space.classes[i];
    f << "\n";
    for (const auto& e : entries) {
        f << e.path << '\t' << e.prov.label << '\t' << e.prov.family << '\t'
          << opt_int_str(e.prov.seed) << '\t' << e.prov.base_epochs << '\t'
          << e.prov.finetune_extra_epochs << '\t' << opt_u64_str(e.prov.noise_seed) << '\t'
          << to_string(e.split) << "\n";
    }
    check(f.good(), "manifest: write failed: " + path);
}

DatasetManifest DatasetManifest::parse(const std::string& path) {
    std::ifstream f(path);
    check(f.good(), "manifest: cannot open: " + path);
    std::string header;
    check(static_cast<bool>(std::getline(f, header)), "manifest: empty file");
    std::istringstream hs(header);
    std::string tag;
    hs >> tag;
    check(tag == "#gda-manifest", "manifest: bad header in " + path);
    DatasetManifest m;
    m.base_dir = fs::path(path).parent_path().string();
    std::string field;
    bool version_ok = false;
    while (hs >> field) {
        if (field.rfind("v", 0) == 0 && field.size() > 1 && std::isdigit(field[1])) {
            check(std::stoi(field.substr(1)) == kSchemaVersion,
                  "manifest: unsupported schema version " + field);
            version_ok = true;
        } else if (field.rfind("h=", 0) == 0) {
            m.height = std::stoi(field.substr(2));
        } else if (field.rfind("w=", 0) == 0) {
            m.width = std::stoi(field.substr(2));
        } else if (field.rfind("c=", 0) == 0) {
            m.channels = std::stoi(field.substr(2));
        } else if (field.rfind("classes=", 0) == 0) {
            std::istringstream cs(field.substr(8));
            std::string cls;
            while (std::getline(cs, cls, ',')) m.label_space.classes.push_back(cls);
        }
    }
    check(version_ok, "manifest: missing schema version");
    m.label_space.validate();
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto cols = split_tabs(line);
        check(cols.size() == 8, "manifest: bad record (want 8 tab-separated fields): " + line);
        ManifestEntry e;
        e.path = cols[0];
        e.prov.label = cols[1];
        e.prov.family = cols[2];
        if (cols[3] != "-") e.prov.seed = std::stoi(cols[3]);
        e.prov.base_epochs = std::stoi(cols[4]);
        e.prov.finetune_extra_epochs = std::stoi(cols[5]);
        if (cols[6] != "-") e.prov.noise_seed = std::stoull(cols[6]);
        e.split = split_from_string(cols[7]);
        m.entries.push_back(std::move(e));
    }
    return m;
}

namespace {

struct SidecarRecord {
    std::string file; // absolute path
    Provenance prov;
};

std::vector<SidecarRecord> scan_sidecars(const std::string& image_root) {
    std::vector<SidecarRecord> records;
    std::set<std::string> listed;
    std::vector<fs::path> sidecars;
    check(fs::exists(image_root), "build_manifest: image root does not exist: " + image_root);
    for (const auto& p : fs::recursive_directory_iterator(image_root))
        if (p.is_regular_file() && p.path().filename() == "provenance.jsonl")
            sidecars.push_back(p.path());
    std::sort(sidecars.begin(), sidecars.end());
    for (const auto& sc : sidecars) {
        std::ifstream f(sc);
        check(f.good(), "build_manifest: cannot open sidecar " + sc.string());
        std::string line;
        size_t lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            if (line.empty()) continue;
            json j;
            try {
                j = json::parse(line);
            } catch (const std::exception& ex) {
                fail("build_manifest: bad sidecar line " + std::to_string(lineno) + " in " +
                     sc.string() + ": " + ex.what());
            }
            SidecarRecord r;
            r.file = (sc.parent_path() / j.at("file").get<std::string>()).string();
            r.prov.label = j.at("label").get<std::string>();
            r.prov.family = j.at("family").get<std::string>();
            if (j.contains("seed") && !j["seed"].is_null()) r.prov.seed = j["seed"].get<int>();
            r.prov.base_epochs = j.value("base_epochs", 0);
            r.prov.finetune_extra_epochs = j.value("finetune_extra_epochs", 0);
            if (j.contains("noise_seed") && !j["noise_seed"].is_null())
                r.prov.noise_seed = j["noise_seed"].get<uint64_t>();
            r.prov.validate();
            listed.insert(fs::weakly_canonical(r.file).string());
            records.push_back(std::move(r));
        }
    }
    // Reject stray images that carry no provenance record.
    for (const auto& p : fs::recursive_directory_iterator(image_root)) {
        if (!p.is_regular_file() || p.path().extension() != ".png") continue;
        if (!listed.count(fs::weakly_canonical(p.path()).string()))
            std::cerr << "build_manifest: rejecting " << p.path().string()
                      << ": missing provenance record\n";
    }
    std::sort(records.begin(), records.end(),
              [](const SidecarRecord& a, const SidecarRecord& b) { return a.file < b.file; });
    return records;
}

} // namespace

DatasetManifest build_manifest(const std::string& image_root, const SplitRules& rules) {
    rules.validate();
    auto records = scan_sidecars(image_root);
    check(!records.empty(), "build_manifest: no entries under " + image_root);

    // Shape check and label space discovery.
    int h = -1, w = -1, c = -1;
    std::set<std::string> families;
    for (const auto& r : records) {
        check(fs::exists(r.file), "build_manifest: sidecar names missing file " + r.file);
        if (!r.prov.is_real()) families.insert(r.prov.family);
    }
    {
        const Image probe = load_png(records.front().file);
        h = probe.h;
        w = probe.w;
        c = probe.c;
    }

    DatasetManifest m;
    m.label_space = LabelSpace::for_families({families.begin(), families.end()});
    m.height = h;
    m.width = w;
    m.channels = c;

    const std::set<int> train_seed_set(rules.train_seeds.begin(), rules.train_seeds.end());

    // Group records for split assignment.
    std::vector<const SidecarRecord*> real;
    std::map<std::pair<std::string, int>, std::vector<const SidecarRecord*>> per_family_seed;
    std::vector<const SidecarRecord*> finetuned;
    for (const auto& r : records) {
        const Image img = load_png(r.file);
        check(img.h == h && img.w == w && img.c == c,
              "build_manifest: shape mismatch for " + r.file);
        if (r.prov.is_real()) {
            real.push_back(&r);
        } else if (r.prov.finetune_extra_epochs > 0) {
            finetuned.push_back(&r);
        } else if (r.prov.seed && (train_seed_set.count(*r.prov.seed) ||
                                   *r.prov.seed == rules.crossseed_seed)) {
            per_family_seed[{r.prov.family, *r.prov.seed}].push_back(&r);
        } else {
            std::cerr << "build_manifest: rejecting " << r.file << ": seed "
                      << opt_int_str(r.prov.seed) << " outside configured seed sets\n";
        }
    }

    Rng rng(rules.shuffle_seed, "manifest-splits");
    auto push = [&m](const SidecarRecord* r, Split s) {
        m.entries.push_back({r->file, r->prov, s});
    };

    check(!real.empty(), "build_manifest: no real images found");
    {
        std::vector<const SidecarRecord*> shuffled = real;
        rng.shuffle(shuffled);
        const int need = rules.real_train + rules.real_closed + rules.real_crossseed +
                         rules.real_finetune;
        check(static_cast<int>(shuffled.size()) >= need,
              "build_manifest: need " + std::to_string(need) + " real images, have " +
                  std::to_string(shuffled.size()));
        int idx = 0;
        for (int i = 0; i < rules.real_train; ++i) push(shuffled[idx++], Split::train);
        for (int i = 0; i < rules.real_closed; ++i) push(shuffled[idx++], Split::closed_test);
        for (int i = 0; i < rules.real_crossseed; ++i) push(shuffled[idx++], Split::crossseed_test);
        for (int i = 0; i < rules.real_finetune; ++i) push(shuffled[idx++], Split::finetune_test);
    }

    for (auto& [key, group] : per_family_seed) {
        std::vector<const SidecarRecord*> shuffled = group;
        rng.shuffle(shuffled);
        if (key.second == rules.crossseed_seed) {
            for (const auto* r : shuffled) push(r, Split::crossseed_test);
        } else {
            const int n_test = static_cast<int>(
                std::llround(rules.closed_test_fraction * static_cast<double>(shuffled.size())));
            for (size_t i = 0; i < shuffled.size(); ++i)
                push(shuffled[i], i < static_cast<size_t>(n_test) ? Split::closed_test
                                                                  : Split::train);
        }
    }
    for (const auto* r : finetuned) push(r, Split::finetune_test);

    std::sort(m.entries.begin(), m.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    m.validate(rules.balance_tolerance);
    return m;
}

bool QueryPredicate::matches(const ManifestEntry& e) const {
    if (split && e.split != *split) return false;
    if (family && e.prov.family != *family) return false;
    if (label && e.prov.label != *label) return false;
    if (seed && (!e.prov.seed || *e.prov.seed != *seed)) return false;
    if (finetune_extra_epochs && e.prov.finetune_extra_epochs != *finetune_extra_epochs)
        return false;
    return true;
}

std::vector<const ManifestEntry*> query(const DatasetManifest& m, const QueryPredicate& pred,
                                        uint64_t shuffle_seed) {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : m.entries)
        if (pred.matches(e)) out.push_back(&e);
    if (out.empty()) std::cerr << "query: warning: predicate matched no manifest entries\n";
    if (shuffle_seed != 0) {
        Rng rng(shuffle_seed, "manifest-query");
        rng.shuffle(out);
    }
    return out;
}

SampleSet load_samples(const DatasetManifest& m, const std::vector<const ManifestEntry*>& sel) {
    SampleSet set;
    const int n = static_cast<int>(sel.size());
    set.x = Tensor({n, m.channels, m.height, m.width});
    set.labels.resize(static_cast<size_t>(n));
    set.entries = sel;
#pragma omp parallel for schedule(dynamic, 16)
    for (int i = 0; i < n; ++i) {
        const Image img = load_png(m.resolve_path(*sel[static_cast<size_t>(i)]));
        check(img.h == m.height && img.w == m.width && img.c == m.channels,
              "load_samples: shape mismatch for " + sel[static_cast<size_t>(i)]->path);
        image_into_tensor(img, set.x, i);
    }
    for (int i = 0; i < n; ++i)
        set.labels[static_cast<size_t>(i)] =
            m.label_space.index_of(sel[static_cast<size_t>(i)]->prov.label);
    return set;
}

} // namespace gda::data

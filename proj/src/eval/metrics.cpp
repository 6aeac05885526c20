#include "gda/eval/metrics.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

using nlohmann::json;

namespace gda::eval {

std::string to_string(Regime r) {
    switch (r) {
        case Regime::closed_set: return "closed_set";
        case Regime::cross_seed: return "cross_seed";
        case Regime::finetune: return "finetune";
    }
    fail("unreachable regime");
}

int64_t ConfusionMatrix::total() const {
    int64_t s = 0;
    for (int64_t v : counts) s += v;
    return s;
}

int64_t ConfusionMatrix::trace() const {
    int64_t s = 0;
    for (int i = 0; i < k; ++i) s += at(i, i);
    return s;
}

int64_t ConfusionMatrix::row_sum(int t) const {
    int64_t s = 0;
    for (int p = 0; p < k; ++p) s += at(t, p);
    return s;
}

int64_t ConfusionMatrix::col_sum(int p) const {
    int64_t s = 0;
    for (int t = 0; t < k; ++t) s += at(t, p);
    return s;
}

EvalReport report_from_confusion(const ConfusionMatrix& cm, const std::vector<std::string>& classes,
                                 const std::string& regime) {
    check(cm.k == static_cast<int>(classes.size()), "report: class count mismatch");
    check(cm.total() > 0, "report: empty confusion matrix");
    EvalReport rep;
    rep.regime = regime;
    rep.confusion = cm;
    rep.classes = classes;
    rep.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(cm.total());

    double f1_sum = 0.0;
    int f1_n = 0;
    for (int c = 0; c < cm.k; ++c) {
        PerClassMetrics pc;
        pc.cls = classes[static_cast<size_t>(c)];
        pc.support = cm.row_sum(c);
        const int64_t tp = cm.at(c, c);
        const int64_t fp = cm.col_sum(c) - tp;
        const int64_t fn = pc.support - tp;
        pc.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        pc.recall = pc.support > 0 ? static_cast<double>(tp) / static_cast<double>(pc.support) : 0.0;
        pc.f1 = (pc.precision + pc.recall) > 0.0
                    ? 2.0 * pc.precision * pc.recall / (pc.precision + pc.recall)
                    : 0.0;
        if (pc.support == 0)
            rep.zero_support_classes.push_back(pc.cls);
        else {
            f1_sum += pc.f1;
            ++f1_n;
        }
        rep.per_class.push_back(pc);
    }
    rep.macro_f1 = f1_n > 0 ? f1_sum / f1_n : 0.0;
    return rep;
}

std::string EvalReport::to_json() const {
    json j;
    j["regime"] = regime;
    j["classes"] = classes;
    j["accuracy"] = accuracy;
    j["macro_f1"] = macro_f1;
    std::vector<std::vector<int64_t>> grid;
    for (int t = 0; t < confusion.k; ++t) {
        std::vector<int64_t> row;
        for (int p = 0; p < confusion.k; ++p) row.push_back(confusion.at(t, p));
        grid.push_back(std::move(row));
    }
    j["confusion"] = grid;
    json pcj = json::array();
    for (const auto& pc : per_class)
        pcj.push_back({{"class", pc.cls},
                       {"support", pc.support},
                       {"precision", pc.precision},
                       {"recall", pc.recall},
                       {"f1", pc.f1}});
    j["per_class"] = pcj;
    j["zero_support_classes"] = zero_support_classes;
    if (!config_echo.empty()) j["config_echo"] = json::parse(config_echo);
    return j.dump(2);
}

void EvalReport::save(const std::string& path) const {
    std::ofstream f(path);
    check(f.good(), "report: cannot open for write: " + path);
    f << to_json() << "\n";
    check(f.good(), "report: write failed: " + path);
}

EvalReport evaluate_samples(const PipelineFn& pipeline, const data::SampleSet& samples,
                            const std::vector<std::string>& classes, const std::string& regime,
                            int eval_batch) {
    check(samples.size() > 0, "evaluate: empty sample stream");
    const int n = samples.size();
    ConfusionMatrix cm(static_cast<int>(classes.size()));
    const int64_t per = samples.x.numel() / n;
    for (int at = 0; at < n; at += eval_batch) {
        const int b = std::min(eval_batch, n - at);
        Tensor xb({b, samples.x.dim(1), samples.x.dim(2), samples.x.dim(3)});
        std::copy(samples.x.data() + per * at, samples.x.data() + per * (at + b), xb.data());
        const std::vector<int> pred = pipeline(xb);
        check(static_cast<int>(pred.size()) == b, "evaluate: pipeline returned wrong count");
        for (int i = 0; i < b; ++i)
            cm.add(samples.labels[static_cast<size_t>(at + i)], pred[static_cast<size_t>(i)]);
    }
    return report_from_confusion(cm, classes, regime);
}

EvalReport evaluate(const PipelineFn& pipeline, const data::DatasetManifest& manifest,
                    Regime regime, int eval_batch) {
    data::Split split = data::Split::closed_test;
    switch (regime) {
        case Regime::closed_set: split = data::Split::closed_test; break;
        case Regime::cross_seed: split = data::Split::crossseed_test; break;
        case Regime::finetune: split = data::Split::finetune_test; break;
    }
    data::QueryPredicate pred;
    pred.split = split;
    auto sel = data::query(manifest, pred);
    check(!sel.empty(), "evaluate: no samples in split " + data::to_string(split));

    // Regime isolation, asserted from provenance rather than trusted.
    std::map<std::string, std::set<int>> train_seeds;
    for (const auto& e : manifest.entries)
        if (e.split == data::Split::train && e.prov.seed)
            train_seeds[e.prov.family].insert(*e.prov.seed);
    for (const auto* e : sel) {
        if (regime == Regime::closed_set && e->prov.seed)
            check(train_seeds[e->prov.family].count(*e->prov.seed),
                  "evaluate: closed_set sample from unseen seed " + std::to_string(*e->prov.seed));
        if (regime == Regime::cross_seed && e->prov.seed)
            check(!train_seeds[e->prov.family].count(*e->prov.seed),
                  "evaluate: cross_seed sample reuses train seed " + std::to_string(*e->prov.seed));
        if (regime == Regime::finetune && !e->prov.is_real())
            check(e->prov.finetune_extra_epochs > 0,
                  "evaluate: finetune sample without extra epochs");
    }

    data::SampleSet samples = data::load_samples(manifest, sel);
    return evaluate_samples(pipeline, samples, manifest.label_space.classes, to_string(regime),
                            eval_batch);
}

} // namespace gda::eval

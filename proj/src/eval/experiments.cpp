#include "gda/eval/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "gda/core/archive.hpp"
#include "gda/eval/plots.hpp"
#include "gda/nn/losses.hpp"
#include "gda/nn/optim.hpp"

using nlohmann::json;

namespace gda::eval {

using namespace gda::nn;

PipelineFn make_gda_pipeline(dae::DaeModel* dae, fen::FenModel& fen,
                             clf::AttributionClassifier& clf) {
    const bool denoiser = fen.variant == fen::FenVariant::denoiser;
    check(!denoiser || dae != nullptr, "pipeline: denoiser variant needs a DAE");
    return [dae, denoiser, &fen, &clf](const Tensor& images) {
        fen::FenInput input;
        if (denoiser) {
            input.x = dae::residual_batch(*dae, images);
            input.is_residual = true;
        } else {
            input.x = images;
            input.is_residual = false;
        }
        auto [ce, pe] = fen.forward(input);
        return clf::predict_batch(clf, ce);
    };
}

EmbeddedSet embed_samples(fen::FenModel& fen, dae::DaeModel* dae, const data::SampleSet& samples) {
    const bool denoiser = fen.variant == fen::FenVariant::denoiser;
    check(!denoiser || dae != nullptr, "embed: denoiser variant needs a DAE");
    fen::FenInput input;
    if (denoiser) {
        input.x = dae::residual_batch(*dae, samples.x);
        input.is_residual = true;
    } else {
        input.x = samples.x;
        input.is_residual = false;
    }
    EmbeddedSet out;
    auto [ce, pe] = fen.forward(input);
    out.class_embed = std::move(ce);
    out.proj_embed = std::move(pe);
    out.labels = samples.labels;
    out.entries = samples.entries;
    return out;
}

void save_embeddings(const std::string& path, const EmbeddedSet& set,
                     const data::LabelSpace& label_space) {
    TensorArchive ar;
    ar.put("class_embed", set.class_embed);
    ar.put("proj_embed", set.proj_embed);
    Tensor labels({static_cast<int>(set.labels.size())});
    for (size_t i = 0; i < set.labels.size(); ++i) labels[static_cast<int64_t>(i)] =
        static_cast<float>(set.labels[i]);
    ar.put("labels", labels);
    json rows = json::array();
    for (const auto* e : set.entries) {
        json r = {{"path", e->path},
                  {"label", e->prov.label},
                  {"family", e->prov.family},
                  {"base_epochs", e->prov.base_epochs},
                  {"finetune_extra_epochs", e->prov.finetune_extra_epochs},
                  {"split", data::to_string(e->split)}};
        if (e->prov.seed) r["seed"] = *e->prov.seed;
        if (e->prov.noise_seed) r["noise_seed"] = *e->prov.noise_seed;
        rows.push_back(std::move(r));
    }
    ar.put_meta(json{{"kind", "fen_embeddings"},
                     {"classes", label_space.classes},
                     {"rows", std::move(rows)}}
                    .dump());
    ar.save(path);
}

LoadedEmbeddings load_embeddings(const std::string& path) {
    TensorArchive ar = TensorArchive::load(path);
    json meta = json::parse(ar.meta());
    check(meta.value("kind", "") == "fen_embeddings", "not an embedding archive: " + path);
    LoadedEmbeddings out;
    out.class_embed = ar.get("class_embed");
    out.proj_embed = ar.get("proj_embed");
    out.label_space.classes = meta.at("classes").get<std::vector<std::string>>();
    out.label_space.validate();
    const Tensor& labels = ar.get("labels");
    for (int64_t i = 0; i < labels.numel(); ++i)
        out.labels.push_back(static_cast<int>(labels[i]));
    for (const auto& r : meta.at("rows")) {
        data::ManifestEntry e;
        e.path = r.at("path").get<std::string>();
        e.prov.label = r.at("label").get<std::string>();
        e.prov.family = r.at("family").get<std::string>();
        if (r.contains("seed")) e.prov.seed = r.at("seed").get<int>();
        e.prov.base_epochs = r.value("base_epochs", 0);
        e.prov.finetune_extra_epochs = r.value("finetune_extra_epochs", 0);
        if (r.contains("noise_seed")) e.prov.noise_seed = r.at("noise_seed").get<uint64_t>();
        e.split = data::split_from_string(r.at("split").get<std::string>());
        out.entries.push_back(std::move(e));
    }
    return out;
}

// ---------------------------------------------------------------- simple CNN

namespace {

nn::Net build_simple_cnn(int channels, int num_classes, Rng& rng) {
    Net net;
    net.add<Conv2d>(channels, 16, 3, 2, 1, false, rng);
    net.add<BatchNorm2d>(16);
    net.add<ReLU>();
    net.add<Conv2d>(16, 32, 3, 2, 1, false, rng);
    net.add<BatchNorm2d>(32);
    net.add<ReLU>();
    net.add<Conv2d>(32, 64, 3, 2, 1, false, rng);
    net.add<BatchNorm2d>(64);
    net.add<ReLU>();
    net.add<GlobalAvgPool>();
    net.add<Linear>(64, num_classes, true, rng);
    return net;
}

Tensor gather_rows(const Tensor& all, const std::vector<int>& order, int start, int count) {
    const int64_t per = all.numel() / all.dim(0);
    std::vector<int> shape = all.shape();
    shape[0] = count;
    Tensor out(shape);
    for (int i = 0; i < count; ++i) {
        const int src = order[static_cast<size_t>(start + i)];
        std::copy(all.data() + per * src, all.data() + per * (src + 1), out.data() + per * i);
    }
    return out;
}

} // namespace

SimpleCnnModel train_simple_cnn(const data::SampleSet& train, int num_classes,
                                const SimpleCnnConfig& cfg, bool verbose) {
    check(train.size() > 0, "simple_cnn: empty training set");
    SimpleCnnModel model;
    model.num_classes = num_classes;
    Rng init(cfg.seed, "simple_cnn/init");
    model.net = build_simple_cnn(train.x.dim(1), num_classes, init);

    Adam opt(model.net.params(), cfg.lr);
    const int n = train.size();
    const int batch = std::min(cfg.batch, n);
    const int steps = n / batch;
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    std::vector<int> yb(static_cast<size_t>(batch));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng order_rng(cfg.seed, "simple_cnn/order/" + std::to_string(epoch));
        order_rng.shuffle(order);
        double loss_sum = 0.0;
        for (int step = 0; step < steps; ++step) {
            Tensor xb = gather_rows(train.x, order, step * batch, batch);
            for (int i = 0; i < batch; ++i)
                yb[static_cast<size_t>(i)] =
                    train.labels[static_cast<size_t>(order[static_cast<size_t>(step * batch + i)])];
            model.net.zero_grads();
            Tensor logits = model.net.forward(xb, true);
            Tensor dlogits;
            const float loss = softmax_xent(logits, yb, dlogits);
            check(std::isfinite(loss), "simple_cnn: non-finite loss");
            model.net.backward(dlogits);
            opt.step();
            loss_sum += loss;
        }
        if (verbose && (epoch == 0 || epoch % 10 == 9))
            std::printf("  [cnn] epoch %d: xent %.4f\n", epoch, loss_sum / steps);
    }
    return model;
}

std::vector<int> simple_cnn_predict(SimpleCnnModel& model, const Tensor& x) {
    const int n = x.dim(0);
    const int chunk = 512;
    std::vector<int> out;
    out.reserve(static_cast<size_t>(n));
    const int64_t per = x.numel() / n;
    for (int at = 0; at < n; at += chunk) {
        const int b = std::min(chunk, n - at);
        Tensor xb({b, x.dim(1), x.dim(2), x.dim(3)});
        std::copy(x.data() + per * at, x.data() + per * (at + b), xb.data());
        Tensor logits = model.net.forward(xb, false);
        const int k = logits.dim(1);
        for (int i = 0; i < b; ++i) {
            const float* row = logits.data() + static_cast<int64_t>(i) * k;
            int arg = 0;
            for (int j = 1; j < k; ++j)
                if (row[j] > row[arg]) arg = j;
            out.push_back(arg);
        }
    }
    return out;
}

// ---------------------------------------------------------------- GDA-Net

GdaNet train_gda_net(const data::DatasetManifest& manifest, dae::DaeModel* dae,
                     fen::FenVariant variant, const fen::FenConfig& fen_cfg,
                     const clf::ClfConfig& clf_cfg, std::optional<int> only_seed, bool verbose) {
    data::QueryPredicate pred;
    pred.split = data::Split::train;
    auto sel = data::query(manifest, pred);
    if (only_seed) {
        std::vector<const data::ManifestEntry*> filtered;
        for (const auto* e : sel)
            if (e->prov.is_real() || (e->prov.seed && *e->prov.seed == *only_seed))
                filtered.push_back(e);
        sel = std::move(filtered);
    }
    check(!sel.empty(), "train_gda_net: empty train selection");
    data::SampleSet train = data::load_samples(manifest, sel);

    if (variant == fen::FenVariant::denoiser) {
        check(dae != nullptr, "train_gda_net: denoiser variant needs a trained DAE");
        train.x = dae::residual_batch(*dae, train.x);
    }

    GdaNet net;
    net.fen = fen::train_fen(train, variant, fen_cfg, manifest.label_space.size(), verbose);

    // classifier trains on frozen-FEN embeddings of the clean train images
    fen::FenInput input{train.x, variant == fen::FenVariant::denoiser};
    auto [ce, pe] = net.fen.forward(input);
    net.clf = clf::train_classifier(ce, train.labels, manifest.label_space, clf_cfg, verbose);
    return net;
}

// ---------------------------------------------------------------- suites

namespace {

data::SampleSet load_split(const data::DatasetManifest& manifest, data::Split split,
                           std::optional<int> only_seed = std::nullopt) {
    data::QueryPredicate pred;
    pred.split = split;
    auto sel = data::query(manifest, pred);
    if (only_seed) {
        std::vector<const data::ManifestEntry*> filtered;
        for (const auto* e : sel)
            if (e->prov.is_real() || (e->prov.seed && *e->prov.seed == *only_seed))
                filtered.push_back(e);
        sel = std::move(filtered);
    }
    check(!sel.empty(), "load_split: no samples for " + data::to_string(split));
    return data::load_samples(manifest, sel);
}

AblationLeg run_cnn_leg(const std::string& name, const data::DatasetManifest& manifest,
                        dae::DaeModel* dae, std::optional<int> only_seed,
                        const AblationConfig& cfg) {
    AblationLeg leg;
    leg.name = name;
    try {
        data::SampleSet train = load_split(manifest, data::Split::train, only_seed);
        if (dae) train.x = dae::residual_batch(*dae, train.x);
        SimpleCnnModel model =
            train_simple_cnn(train, manifest.label_space.size(), cfg.cnn, cfg.verbose);

        PipelineFn f = [&model, dae](const Tensor& images) {
            Tensor x = dae ? dae::residual_batch(*dae, images) : images;
            return simple_cnn_predict(model, x);
        };
        data::SampleSet closed = load_split(manifest, data::Split::closed_test, only_seed);
        data::SampleSet cross = load_split(manifest, data::Split::crossseed_test);
        EvalReport closed_rep =
            evaluate_samples(f, closed, manifest.label_space.classes, "closed_set");
        EvalReport cross_rep =
            evaluate_samples(f, cross, manifest.label_space.classes, "cross_seed");
        leg.closed_accuracy = closed_rep.accuracy;
        leg.cross_accuracy = cross_rep.accuracy;
        leg.cross_macro_f1 = cross_rep.macro_f1;
        leg.ok = true;
    } catch (const std::exception& ex) {
        leg.error = ex.what();
    }
    return leg;
}

AblationLeg run_fen_leg(const std::string& name, const data::DatasetManifest& manifest,
                        dae::DaeModel* dae, fen::FenVariant variant, const AblationConfig& cfg) {
    AblationLeg leg;
    leg.name = name;
    try {
        GdaNet net =
            train_gda_net(manifest, dae, variant, cfg.fen, cfg.clf, std::nullopt, cfg.verbose);
        PipelineFn f = make_gda_pipeline(dae, net.fen, net.clf);
        EvalReport closed_rep = evaluate(f, manifest, Regime::closed_set);
        EvalReport cross_rep = evaluate(f, manifest, Regime::cross_seed);
        leg.closed_accuracy = closed_rep.accuracy;
        leg.cross_accuracy = cross_rep.accuracy;
        leg.cross_macro_f1 = cross_rep.macro_f1;
        leg.ok = true;
    } catch (const std::exception& ex) {
        leg.error = ex.what();
    }
    return leg;
}

} // namespace

AblationTable ablation_suite(const data::DatasetManifest& manifest, dae::DaeModel& dae,
                             const AblationConfig& cfg) {
    AblationTable table;
    table.legs.push_back(
        run_cnn_leg("single_seed_clf", manifest, nullptr, cfg.single_seed, cfg));
    table.legs.push_back(
        run_cnn_leg("single_seed_dae_clf", manifest, &dae, cfg.single_seed, cfg));
    table.legs.push_back(run_cnn_leg("multi_seed_dae_clf", manifest, &dae, std::nullopt, cfg));
    table.legs.push_back(
        run_fen_leg("multi_seed_fen_clf", manifest, nullptr, fen::FenVariant::vanilla, cfg));
    table.legs.push_back(
        run_fen_leg("multi_seed_dae_fen_clf", manifest, &dae, fen::FenVariant::denoiser, cfg));
    return table;
}

std::string AblationTable::to_json() const {
    json legs_json = json::array();
    for (const auto& leg : legs) {
        json j = {{"name", leg.name}, {"ok", leg.ok}};
        if (leg.ok) {
            j["closed_accuracy"] = leg.closed_accuracy;
            j["cross_accuracy"] = leg.cross_accuracy;
            j["cross_macro_f1"] = leg.cross_macro_f1;
        } else {
            j["error"] = leg.error;
        }
        legs_json.push_back(std::move(j));
    }
    return json{{"kind", "ablation_table"}, {"legs", std::move(legs_json)}}.dump(2);
}

void AblationTable::save(const std::string& path) const {
    std::ofstream f(path);
    check(f.good(), "ablation: cannot write " + path);
    f << to_json() << "\n";
}

std::vector<FamilyAccuracy> crossseed_per_family(const PipelineFn& pipeline,
                                                 const data::DatasetManifest& manifest) {
    std::vector<FamilyAccuracy> rows;
    data::QueryPredicate pred;
    pred.split = data::Split::crossseed_test;
    auto sel = data::query(manifest, pred);
    check(!sel.empty(), "crossseed_per_family: empty crossseed split");
    data::SampleSet samples = data::load_samples(manifest, sel);
    EvalReport rep = evaluate_samples(pipeline, samples, manifest.label_space.classes,
                                      "cross_seed_per_family");
    for (int c = 1; c < manifest.label_space.size(); ++c) {
        FamilyAccuracy fa;
        fa.family = manifest.label_space.classes[static_cast<size_t>(c)];
        fa.support = rep.confusion.row_sum(c);
        fa.present = fa.support > 0;
        fa.accuracy = fa.present ? static_cast<double>(rep.confusion.at(c, c)) /
                                       static_cast<double>(fa.support)
                                 : 0.0;
        rows.push_back(fa);
    }
    return rows;
}

std::vector<FinetuneRow> finetune_eval(const PipelineFn& pipeline,
                                       const data::DatasetManifest& manifest) {
    data::QueryPredicate pred;
    pred.split = data::Split::finetune_test;
    auto sel = data::query(manifest, pred);
    check(!sel.empty(), "finetune_eval: finetune_test split is empty");

    std::set<std::string> tuned_families;
    for (const auto* e : sel)
        if (!e->prov.is_real()) tuned_families.insert(e->prov.family);
    check(!tuned_families.empty(), "finetune_eval: no fine-tuned instances in split");

    auto before = crossseed_per_family(pipeline, manifest);

    data::SampleSet samples = data::load_samples(manifest, sel);
    EvalReport after =
        evaluate_samples(pipeline, samples, manifest.label_space.classes, "finetune");

    std::vector<FinetuneRow> rows;
    for (const auto& fam : tuned_families) {
        FinetuneRow row;
        row.family = fam;
        for (const auto& b : before)
            if (b.family == fam) row.accuracy_before = b.accuracy;
        const int c = manifest.label_space.index_of(fam);
        const int64_t support = after.confusion.row_sum(c);
        check(support > 0, "finetune_eval: family " + fam + " missing from finetune data");
        row.accuracy_after =
            static_cast<double>(after.confusion.at(c, c)) / static_cast<double>(support);
        row.drop = row.accuracy_before - row.accuracy_after;
        rows.push_back(row);
    }
    return rows;
}

std::map<std::string, double> knn_family_agreement(const EmbeddedSet& train,
                                                   const EmbeddedSet& cross,
                                                   const data::LabelSpace& labels, int k) {
    const int nt = train.proj_embed.dim(0);
    const int nc = cross.proj_embed.dim(0);
    const int d = train.proj_embed.dim(1);
    check(nt >= k, "knn: not enough train embeddings");

    std::vector<int> votes(static_cast<size_t>(nc), -1);
#pragma omp parallel for schedule(dynamic, 32)
    for (int i = 0; i < nc; ++i) {
        const float* q = cross.proj_embed.data() + static_cast<int64_t>(i) * d;
        // top-k by cosine similarity (unit vectors: dot product)
        std::vector<std::pair<float, int>> best;
        best.reserve(static_cast<size_t>(k) + 1);
        for (int j = 0; j < nt; ++j) {
            const float* t = train.proj_embed.data() + static_cast<int64_t>(j) * d;
            float dot = 0.0f;
            for (int c = 0; c < d; ++c) dot += q[c] * t[c];
            if (static_cast<int>(best.size()) < k) {
                best.emplace_back(dot, j);
                std::sort(best.begin(), best.end());
            } else if (dot > best.front().first) {
                best.front() = {dot, j};
                std::sort(best.begin(), best.end());
            }
        }
        std::map<int, int> tally;
        for (const auto& [s, j] : best) ++tally[train.labels[static_cast<size_t>(j)]];
        int arg = -1, cnt = -1;
        for (const auto& [lbl, c] : tally)
            if (c > cnt) {
                cnt = c;
                arg = lbl;
            }
        votes[static_cast<size_t>(i)] = arg;
    }

    std::map<std::string, std::pair<int64_t, int64_t>> agg; // family -> (hits, total)
    for (int i = 0; i < nc; ++i) {
        const int y = cross.labels[static_cast<size_t>(i)];
        if (y == 0) continue; // families only
        auto& [hits, total] = agg[labels.classes[static_cast<size_t>(y)]];
        ++total;
        if (votes[static_cast<size_t>(i)] == y) ++hits;
    }
    std::map<std::string, double> out;
    for (const auto& [fam, ht] : agg)
        out[fam] = static_cast<double>(ht.first) / static_cast<double>(ht.second);
    return out;
}

double export_tsne(const EmbeddedSet& set, const data::LabelSpace& labels,
                   const std::string& out_base, const TsneConfig& cfg, int max_points) {
    const int n = set.proj_embed.dim(0);
    check(n >= 50, "export_tsne: need at least 50 embeddings");
    check(cfg.perplexity < static_cast<double>(std::min(n, max_points)) / 3.0,
          "export_tsne: perplexity too large for point count");

    // deterministic subsample
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    if (n > max_points) {
        Rng rng(cfg.seed, "tsne/subsample");
        rng.shuffle(idx);
        idx.resize(static_cast<size_t>(max_points));
        std::sort(idx.begin(), idx.end());
    }
    const int m = static_cast<int>(idx.size());
    const int d = set.proj_embed.dim(1);
    Tensor sub({m, d});
    for (int i = 0; i < m; ++i)
        std::copy(set.proj_embed.data() + static_cast<int64_t>(idx[static_cast<size_t>(i)]) * d,
                  set.proj_embed.data() + static_cast<int64_t>(idx[static_cast<size_t>(i)] + 1) * d,
                  sub.data() + static_cast<int64_t>(i) * d);

    Tensor pts = tsne_fit(sub, cfg);

    std::vector<TsnePoint> points;
    std::vector<int> sub_labels;
    for (int i = 0; i < m; ++i) {
        const int src = idx[static_cast<size_t>(i)];
        const auto* e = set.entries[static_cast<size_t>(src)];
        TsnePoint p;
        p.x = pts[static_cast<int64_t>(i) * 2];
        p.y = pts[static_cast<int64_t>(i) * 2 + 1];
        p.label = set.labels[static_cast<size_t>(src)];
        p.family = e->prov.family;
        p.seed = e->prov.seed ? std::to_string(*e->prov.seed) : "-";
        p.split = data::to_string(e->split);
        points.push_back(std::move(p));
        sub_labels.push_back(set.labels[static_cast<size_t>(src)]);
    }
    export_scatter(points, labels.size(), out_base);
    return silhouette_score(pts, sub_labels);
}

} // namespace gda::eval

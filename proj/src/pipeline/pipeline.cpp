#include "gda/pipeline/pipeline.hpp"

#include <json.hpp>
#include <omp.h>

#include <Eigen/Core>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gda/core/digest.hpp"
#include "gda/data/manifest.hpp"
#include "gda/eval/plots.hpp"
#include "gda/synth/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gda::pipe {

namespace {

const std::vector<std::string> kStages = {"real",  "ganzoo",     "manifest", "dae",
                                          "fen",   "classifier", "eval"};

struct RunContext {
    ExperimentConfig cfg;
    fs::path out;
    bool verbose = true;
    json state;

    fs::path images() const { return out / "images"; }
    fs::path checkpoints() const { return out / "checkpoints"; }
    fs::path manifests() const { return out / "manifests"; }
    fs::path embeddings() const { return out / "embeddings"; }
    fs::path reports() const { return out / "reports"; }
    fs::path manifest_file() const { return manifests() / "manifest.tsv"; }
    fs::path dae_ckpt() const { return checkpoints() / "dae.gdat"; }
    fs::path fen_ckpt() const {
        return checkpoints() / ("fen_" + fen::to_string(cfg.fen_variant) + ".gdat");
    }
    fs::path clf_ckpt() const {
        return checkpoints() / ("clf_" + fen::to_string(cfg.fen_variant) + ".gdat");
    }
    fs::path gan_ckpt(const std::string& family, int seed, bool finetuned) const {
        return checkpoints() / "ganzoo" /
               (family + "_s" + std::to_string(seed) + (finetuned ? "_ft" : "") + ".gdat");
    }

    void load_state() {
        const fs::path p = out / "state.json";
        if (fs::exists(p)) {
            std::ifstream f(p);
            std::stringstream ss;
            ss << f.rdbuf();
            state = json::parse(ss.str());
        } else {
            state = json{{"stages", json::object()}};
        }
    }

    void save_state() {
        std::ofstream f(out / "state.json");
        check(f.good(), "pipeline: cannot write state file");
        f << state.dump(2) << "\n";
    }

    bool stage_done(const std::string& name, const std::string& digest) const {
        const auto& stages = state.at("stages");
        return stages.contains(name) && stages.at(name).value("done", false) &&
               stages.at(name).value("digest", "") == digest;
    }

    void mark_done(const std::string& name, const std::string& digest) {
        state["stages"][name] = {{"digest", digest}, {"done", true}};
        save_state();
    }
};

uint64_t derive_seed(uint64_t base, const std::string& name) {
    uint64_t x = base ^ Rng::hash(name);
    return Rng::splitmix(x);
}

std::string stage_digest(const RunContext& ctx, const std::string& stage,
                         const std::string& upstream) {
    json j = json::parse(ctx.cfg.to_json());
    json relevant;
    relevant["seed"] = ctx.cfg.determinism_seed;
    relevant["image"] = j["image"];
    if (stage == "real") {
        relevant["data"] = {{"real_dir", ctx.cfg.data.real_dir},
                            {"synth_count", ctx.cfg.data.synth_count}};
    } else if (stage == "ganzoo") {
        relevant["families"] = j["families"];
        relevant["seeds"] = j["seeds"];
        relevant["counts"] = {{"per_seed", ctx.cfg.data.per_seed_images},
                              {"crossseed", ctx.cfg.data.crossseed_images},
                              {"finetune", ctx.cfg.data.finetune_images}};
    } else if (stage == "manifest") {
        relevant["data"] = j["data"];
        relevant["seeds"] = j["seeds"];
    } else if (stage == "dae") {
        relevant["dae"] = j["dae"];
    } else if (stage == "fen") {
        relevant["fen"] = j["fen"];
    } else if (stage == "classifier") {
        relevant["classifier"] = j["classifier"];
    } else if (stage == "eval") {
        relevant["eval"] = j["eval"];
        relevant["cnn"] = j["cnn"];
    }
    Digest d;
    d.update(stage);
    d.update(upstream);
    d.update(relevant.dump());
    return d.hex();
}

// ---- stage implementations -------------------------------------------------

void stage_real(RunContext& ctx) {
    const fs::path real_dir = ctx.images() / "real";
    fs::create_directories(real_dir);
    if (ctx.cfg.data.real_dir.empty()) {
        synth::SynthConfig sc;
        sc.count = ctx.cfg.data.synth_count;
        sc.height = ctx.cfg.height;
        sc.width = ctx.cfg.width;
        sc.seed = derive_seed(ctx.cfg.determinism_seed, "synth");
        if (ctx.verbose)
            std::printf("[real] synthesizing %d stand-in real images\n", sc.count);
        synth::generate_corpus(real_dir.string(), sc);
        return;
    }
    // ingest an external folder: index every PNG with a real-label sidecar
    fs::path src = ctx.cfg.data.real_dir;
    if (src.is_relative()) {
        const char* root = std::getenv("GDA_DATA_ROOT");
        if (root) src = fs::path(root) / src;
    }
    check(fs::exists(src), "real data folder does not exist: " + src.string());
    std::vector<fs::path> pngs;
    for (const auto& p : fs::recursive_directory_iterator(src))
        if (p.is_regular_file() && p.path().extension() == ".png") pngs.push_back(p.path());
    std::sort(pngs.begin(), pngs.end());
    check(!pngs.empty(), "real data folder has no PNG images: " + src.string());
    std::ofstream sidecar(real_dir / "provenance.jsonl");
    check(sidecar.good(), "cannot write real-data sidecar");
    for (const auto& p : pngs) {
        json rec = {{"file", fs::absolute(p).string()}, {"label", "real"}, {"family", "real"}};
        sidecar << rec.dump() << "\n";
    }
    if (ctx.verbose)
        std::printf("[real] ingested %zu real images from %s\n", pngs.size(), src.string().c_str());
}

Tensor load_real_train(const RunContext& ctx, const data::DatasetManifest& manifest) {
    data::QueryPredicate pred;
    pred.split = data::Split::train;
    pred.label = std::string(data::kRealClass);
    auto sel = data::query(manifest, pred);
    check(!sel.empty(), "no real train images in manifest");
    return data::load_samples(manifest, sel).x;
}

// Real images for GAN training, read straight from the real corpus (the
// manifest does not exist yet when ganzoo runs).
Tensor load_gan_real(const RunContext& ctx) {
    const fs::path real_dir = ctx.images() / "real";
    std::vector<fs::path> files;
    // sidecar order keeps this deterministic even for ingested folders
    std::ifstream sidecar(real_dir / "provenance.jsonl");
    check(sidecar.good(), "ganzoo: real corpus sidecar missing; run stage 'real' first");
    std::string line;
    while (std::getline(sidecar, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        fs::path p = j.at("file").get<std::string>();
        if (p.is_relative()) p = real_dir / p;
        files.push_back(p);
    }
    check(!files.empty(), "ganzoo: empty real corpus");
    // GANs see the same images that become the real train split: the first
    // real_train files in the manifest's deterministic shuffle order.
    Rng rng(ctx.cfg.determinism_seed, "manifest-splits");
    std::vector<size_t> idx(files.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    const int n = std::min<int>(ctx.cfg.data.real_train, static_cast<int>(files.size()));
    Tensor x({n, ctx.cfg.channels, ctx.cfg.height, ctx.cfg.width});
#pragma omp parallel for schedule(dynamic, 16)
    for (int i = 0; i < n; ++i) {
        const Image img = load_png(files[idx[static_cast<size_t>(i)]].string());
        check(img.h == ctx.cfg.height && img.w == ctx.cfg.width,
              "ganzoo: real image shape mismatch");
        image_into_tensor(img, x, i);
    }
    return x;
}

void stage_ganzoo(RunContext& ctx) {
    Tensor real = load_gan_real(ctx);
    fs::create_directories(ctx.checkpoints() / "ganzoo");

    std::vector<int> all_seeds = ctx.cfg.train_seeds;
    all_seeds.push_back(ctx.cfg.crossseed_seed);

    for (const auto& family : ctx.cfg.families) {
        for (int seed : all_seeds) {
            const fs::path ckpt = ctx.gan_ckpt(family.family_id, seed, false);
            if (fs::exists(ckpt)) {
                if (ctx.verbose)
                    std::printf("[ganzoo] %s seed %d: checkpoint exists, skipping\n",
                                family.family_id.c_str(), seed);
            } else {
                if (ctx.verbose)
                    std::printf("[ganzoo] training %s seed %d (%d epochs)\n",
                                family.family_id.c_str(), seed, family.train.epochs);
                ganzoo::train_instance(family, seed, real, ckpt.string(), ctx.verbose);
            }
            const bool is_cross = seed == ctx.cfg.crossseed_seed;
            const int count =
                is_cross ? ctx.cfg.data.crossseed_images : ctx.cfg.data.per_seed_images;
            const fs::path img_dir =
                ctx.images() / (family.family_id + "_s" + std::to_string(seed));
            if (!fs::exists(img_dir / "provenance.jsonl")) {
                const uint64_t noise_seed = derive_seed(
                    ctx.cfg.determinism_seed,
                    "sample/" + family.family_id + "/" + std::to_string(seed));
                ganzoo::sample_images(ckpt.string(), count, noise_seed, img_dir.string());
            }
        }
        // fine-tuned variant of the held-out instance
        const bool tune = std::find(ctx.cfg.finetune_families.begin(),
                                    ctx.cfg.finetune_families.end(),
                                    family.family_id) != ctx.cfg.finetune_families.end();
        if (tune && ctx.cfg.data.finetune_images > 0) {
            const fs::path src = ctx.gan_ckpt(family.family_id, ctx.cfg.crossseed_seed, false);
            const fs::path dst = ctx.gan_ckpt(family.family_id, ctx.cfg.crossseed_seed, true);
            if (!fs::exists(dst)) {
                if (ctx.verbose)
                    std::printf("[ganzoo] fine-tuning %s seed %d (+%d epochs)\n",
                                family.family_id.c_str(), ctx.cfg.crossseed_seed,
                                ctx.cfg.finetune_extra_epochs);
                ganzoo::fine_tune_instance(src.string(), ctx.cfg.finetune_extra_epochs, real,
                                           dst.string(), ctx.verbose);
            }
            const fs::path img_dir =
                ctx.images() /
                (family.family_id + "_s" + std::to_string(ctx.cfg.crossseed_seed) + "_ft");
            if (!fs::exists(img_dir / "provenance.jsonl")) {
                const uint64_t noise_seed = derive_seed(
                    ctx.cfg.determinism_seed, "sample_ft/" + family.family_id);
                ganzoo::sample_images(dst.string(), ctx.cfg.data.finetune_images, noise_seed,
                                      img_dir.string());
            }
        }
    }
}

void stage_manifest(RunContext& ctx) {
    data::SplitRules rules;
    rules.train_seeds = ctx.cfg.train_seeds;
    rules.crossseed_seed = ctx.cfg.crossseed_seed;
    rules.closed_test_fraction = ctx.cfg.data.closed_test_fraction;
    rules.real_train = ctx.cfg.data.real_train;
    rules.real_closed = ctx.cfg.data.real_closed;
    rules.real_crossseed = ctx.cfg.data.real_crossseed;
    rules.real_finetune = ctx.cfg.data.real_finetune;
    rules.shuffle_seed = ctx.cfg.determinism_seed;
    data::DatasetManifest manifest = build_manifest(ctx.images().string(), rules);
    fs::create_directories(ctx.manifests());
    manifest.save(ctx.manifest_file().string());
    if (ctx.verbose)
        std::printf("[manifest] %zu entries, %d classes\n", manifest.entries.size(),
                    manifest.label_space.size());
}

void stage_dae(RunContext& ctx) {
    data::DatasetManifest manifest = data::DatasetManifest::parse(ctx.manifest_file().string());
    data::QueryPredicate train_pred;
    train_pred.split = data::Split::train;
    train_pred.label = std::string(data::kRealClass);
    data::SampleSet train = data::load_samples(manifest, data::query(manifest, train_pred));
    data::QueryPredicate hold_pred;
    hold_pred.split = data::Split::closed_test;
    hold_pred.label = std::string(data::kRealClass);
    data::SampleSet holdout = data::load_samples(manifest, data::query(manifest, hold_pred));
    dae::DaeConfig dc = ctx.cfg.dae;
    dc.seed = derive_seed(ctx.cfg.determinism_seed, "dae");
    dae::DaeModel model = dae::train_dae(train, holdout, dc, ctx.verbose);
    model.save(ctx.dae_ckpt().string());
    if (ctx.verbose)
        std::printf("[dae] train mae %.4f, holdout mae %.4f\n", model.final_train_mae,
                    model.holdout_mae);
}

void embed_split(RunContext& ctx, const data::DatasetManifest& manifest, fen::FenModel& fen_model,
                 dae::DaeModel* dae_model, data::Split split, const std::string& name) {
    data::QueryPredicate pred;
    pred.split = split;
    auto sel = data::query(manifest, pred);
    if (sel.empty()) return;
    data::SampleSet samples = data::load_samples(manifest, sel);
    eval::EmbeddedSet set = eval::embed_samples(fen_model, dae_model, samples);
    eval::save_embeddings((ctx.embeddings() / (name + ".gdat")).string(), set,
                          manifest.label_space);
}

void stage_fen(RunContext& ctx) {
    data::DatasetManifest manifest = data::DatasetManifest::parse(ctx.manifest_file().string());
    const bool denoiser = ctx.cfg.fen_variant == fen::FenVariant::denoiser;
    dae::DaeModel dae_model;
    if (denoiser) dae_model = dae::DaeModel::load(ctx.dae_ckpt().string());

    data::QueryPredicate pred;
    pred.split = data::Split::train;
    data::SampleSet train = data::load_samples(manifest, data::query(manifest, pred));
    if (denoiser) train.x = dae::residual_batch(dae_model, train.x);

    fen::FenConfig fc = ctx.cfg.fen;
    fc.seed = derive_seed(ctx.cfg.determinism_seed, "fen");
    fen::FenModel model =
        fen::train_fen(train, ctx.cfg.fen_variant, fc, manifest.label_space.size(), ctx.verbose);
    fs::create_directories(ctx.checkpoints());
    model.save(ctx.fen_ckpt().string());

    fs::create_directories(ctx.embeddings());
    dae::DaeModel* dm = denoiser ? &dae_model : nullptr;
    embed_split(ctx, manifest, model, dm, data::Split::train, "train");
    embed_split(ctx, manifest, model, dm, data::Split::closed_test, "closed");
    embed_split(ctx, manifest, model, dm, data::Split::crossseed_test, "crossseed");
    embed_split(ctx, manifest, model, dm, data::Split::finetune_test, "finetune");
}

void stage_classifier(RunContext& ctx) {
    data::DatasetManifest manifest = data::DatasetManifest::parse(ctx.manifest_file().string());
    eval::LoadedEmbeddings train =
        eval::load_embeddings((ctx.embeddings() / "train.gdat").string());
    clf::ClfConfig cc = ctx.cfg.clf;
    cc.seed = derive_seed(ctx.cfg.determinism_seed, "clf");
    clf::AttributionClassifier model =
        clf::train_classifier(train.class_embed, train.labels, manifest.label_space, cc,
                              ctx.verbose);
    model.save(ctx.clf_ckpt().string());
    if (ctx.verbose) std::printf("[classifier] train accuracy %.4f\n", model.train_accuracy);
}

eval::EmbeddedSet to_embedded(const eval::LoadedEmbeddings& le,
                              std::vector<data::ManifestEntry>& storage) {
    eval::EmbeddedSet set;
    set.class_embed = le.class_embed;
    set.proj_embed = le.proj_embed;
    set.labels = le.labels;
    storage = le.entries;
    for (const auto& e : storage) set.entries.push_back(&e);
    return set;
}

void stage_eval(RunContext& ctx) {
    data::DatasetManifest manifest = data::DatasetManifest::parse(ctx.manifest_file().string());
    const bool denoiser = ctx.cfg.fen_variant == fen::FenVariant::denoiser;
    dae::DaeModel dae_model = dae::DaeModel::load(ctx.dae_ckpt().string());
    fen::FenModel fen_model = fen::FenModel::load(ctx.fen_ckpt().string());
    clf::AttributionClassifier clf_model = clf::AttributionClassifier::load(ctx.clf_ckpt().string());
    eval::PipelineFn pipeline =
        eval::make_gda_pipeline(denoiser ? &dae_model : nullptr, fen_model, clf_model);

    fs::create_directories(ctx.reports());
    json summary;
    summary["name"] = ctx.cfg.name;
    summary["variant"] = fen::to_string(ctx.cfg.fen_variant);

    const std::string config_echo = ctx.cfg.to_json();
    auto run_regime = [&](eval::Regime regime, const std::string& name) {
        eval::EvalReport rep = eval::evaluate(pipeline, manifest, regime);
        rep.config_echo = config_echo;
        rep.save((ctx.reports() / (name + ".json")).string());
        eval::export_confusion(rep, (ctx.reports() / ("confusion_" + name)).string());
        summary[name] = {{"accuracy", rep.accuracy}, {"macro_f1", rep.macro_f1}};
        if (ctx.verbose)
            std::printf("[eval] %s: accuracy %.4f macro_f1 %.4f\n", name.c_str(), rep.accuracy,
                        rep.macro_f1);
    };
    run_regime(eval::Regime::closed_set, "closed_set");
    run_regime(eval::Regime::cross_seed, "cross_seed");

    {
        auto rows = eval::crossseed_per_family(pipeline, manifest);
        json per_family = json::array();
        for (const auto& r : rows)
            per_family.push_back({{"family", r.family},
                                  {"present", r.present},
                                  {"accuracy", r.accuracy},
                                  {"support", r.support}});
        summary["cross_seed_per_family"] = per_family;
    }

    data::QueryPredicate ft;
    ft.split = data::Split::finetune_test;
    if (!data::query(manifest, ft).empty()) {
        run_regime(eval::Regime::finetune, "finetune");
        auto rows = eval::finetune_eval(pipeline, manifest);
        json ftj = json::array();
        for (const auto& r : rows)
            ftj.push_back({{"family", r.family},
                           {"accuracy_before", r.accuracy_before},
                           {"accuracy_after", r.accuracy_after},
                           {"drop", r.drop}});
        summary["finetune"] = ftj;
    }

    {
        eval::LoadedEmbeddings ltrain =
            eval::load_embeddings((ctx.embeddings() / "train.gdat").string());
        eval::LoadedEmbeddings lcross =
            eval::load_embeddings((ctx.embeddings() / "crossseed.gdat").string());
        std::vector<data::ManifestEntry> s1, s2;
        eval::EmbeddedSet etrain = to_embedded(ltrain, s1);
        eval::EmbeddedSet ecross = to_embedded(lcross, s2);
        auto knn = eval::knn_family_agreement(etrain, ecross, manifest.label_space, 5);
        summary["knn_agreement"] = knn;

        if (ctx.cfg.tsne_export) {
            // train + crossseed joint map, the co-clustering diagnostic
            eval::EmbeddedSet joint;
            const int d = etrain.proj_embed.dim(1);
            const int n1 = etrain.proj_embed.dim(0), n2 = ecross.proj_embed.dim(0);
            joint.proj_embed = Tensor({n1 + n2, d});
            std::copy(etrain.proj_embed.data(), etrain.proj_embed.data() + etrain.proj_embed.numel(),
                      joint.proj_embed.data());
            std::copy(ecross.proj_embed.data(), ecross.proj_embed.data() + ecross.proj_embed.numel(),
                      joint.proj_embed.data() + etrain.proj_embed.numel());
            joint.class_embed = joint.proj_embed; // unused by the export
            joint.labels = etrain.labels;
            joint.labels.insert(joint.labels.end(), ecross.labels.begin(), ecross.labels.end());
            joint.entries = etrain.entries;
            joint.entries.insert(joint.entries.end(), ecross.entries.begin(),
                                 ecross.entries.end());
            eval::TsneConfig tc;
            tc.seed = derive_seed(ctx.cfg.determinism_seed, "tsne");
            const double sil = eval::export_tsne(joint, manifest.label_space,
                                                 (ctx.reports() / "tsne").string(), tc);
            summary["tsne_silhouette"] = sil;
        }
    }

    if (ctx.cfg.run_ablation) {
        eval::AblationConfig ac;
        ac.cnn = ctx.cfg.cnn;
        ac.fen = ctx.cfg.fen;
        ac.clf = ctx.cfg.clf;
        ac.single_seed = ctx.cfg.train_seeds.front();
        ac.verbose = ctx.verbose;
        eval::AblationTable table = eval::ablation_suite(manifest, dae_model, ac);
        table.save((ctx.reports() / "ablation.json").string());
        summary["ablation"] = json::parse(table.to_json());
    }

    std::ofstream f(ctx.reports() / "summary.json");
    check(f.good(), "eval: cannot write summary");
    f << summary.dump(2) << "\n";
}

} // namespace

const std::vector<std::string>& stage_names() { return kStages; }

int apply_thread_config(const ExperimentConfig& cfg, bool deterministic) {
    int n = deterministic ? 1 : cfg.threads;
    if (n <= 0) n = omp_get_max_threads();
    omp_set_num_threads(n);
    Eigen::setNbThreads(n);
    return n;
}

void run_pipeline(const ExperimentConfig& cfg, const std::string& out_dir,
                  const RunOptions& opts) {
    cfg.validate();
    RunContext ctx;
    ctx.cfg = cfg;
    ctx.out = out_dir;
    ctx.verbose = opts.verbose;
    fs::create_directories(ctx.out);
    fs::create_directories(ctx.out / "config");
    cfg.save((ctx.out / "config" / "config.json").string());
    ctx.load_state();
    const int threads = apply_thread_config(cfg, opts.deterministic);
    ctx.state["threads"] = threads;

    using StageFn = void (*)(RunContext&);
    const std::map<std::string, StageFn> impl = {
        {"real", stage_real},       {"ganzoo", stage_ganzoo},
        {"manifest", stage_manifest}, {"dae", stage_dae},
        {"fen", stage_fen},         {"classifier", stage_classifier},
        {"eval", stage_eval}};

    if (opts.only_stage) {
        bool known = false;
        for (const auto& s : kStages) known = known || s == *opts.only_stage;
        if (!known) throw ConfigError("unknown stage '" + *opts.only_stage + "'");
    }

    std::string upstream;
    for (const auto& stage : kStages) {
        const std::string digest = stage_digest(ctx, stage, upstream);
        if (opts.only_stage && stage != *opts.only_stage) {
            if (!ctx.stage_done(stage, digest)) {
                // stages after the requested one don't matter
                bool requested_comes_first = false;
                for (const auto& s : kStages) {
                    if (s == *opts.only_stage) {
                        requested_comes_first = true;
                        break;
                    }
                    if (s == stage) break;
                }
                if (!requested_comes_first)
                    throw StageError(*opts.only_stage,
                                     "prerequisite stage '" + stage + "' has not completed");
            }
            upstream = digest;
            continue;
        }
        if (!opts.only_stage && ctx.stage_done(stage, digest)) {
            if (ctx.verbose) std::printf("[%s] up to date, skipping\n", stage.c_str());
            upstream = digest;
            continue;
        }
        if (ctx.verbose) std::printf("[%s] running\n", stage.c_str());
        try {
            impl.at(stage)(ctx);
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& ex) {
            throw StageError(stage, ex.what());
        }
        ctx.mark_done(stage, digest);
        upstream = digest;
        if (opts.only_stage && stage == *opts.only_stage) break;
    }
}

} // namespace gda::pipe

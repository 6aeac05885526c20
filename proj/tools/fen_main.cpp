#include "common.hpp"
#include "gda/dae/dae.hpp"
#include "gda/eval/experiments.hpp"
#include "gda/fen/fen.hpp"
#include "gda/pipeline/pipeline.hpp"

#include <cstdio>

using namespace gda;

int main(int argc, char** argv) {
    CLI::App app{"feature extraction network: contrastive training and embedding export"};
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "train a FEN variant from a manifest");
    std::string variant_str = "denoiser", manifest_path, dae_ckpt, out_ckpt = "fen.gdat";
    int epochs = -1, threads = 0;
    uint64_t seed = 1;
    train->add_option("--variant", variant_str, "vanilla|denoiser");
    train->add_option("--manifest", manifest_path, "dataset manifest")->required();
    train->add_option("--dae", dae_ckpt, "DAE checkpoint (denoiser variant)");
    train->add_option("--out", out_ckpt, "output checkpoint");
    train->add_option("--epochs", epochs, "override default epochs");
    train->add_option("--seed", seed, "training seed");
    train->add_option("--threads", threads, "worker threads (0 = hardware)");

    auto* embed = app.add_subcommand("embed", "export embeddings for one split");
    std::string e_ckpt, e_manifest, e_dae, e_split = "train", e_out = "embeddings.gdat";
    embed->add_option("--ckpt", e_ckpt, "FEN checkpoint")->required();
    embed->add_option("--manifest", e_manifest, "dataset manifest")->required();
    embed->add_option("--dae", e_dae, "DAE checkpoint (denoiser variant)");
    embed->add_option("--split", e_split, "train|closed_test|crossseed_test|finetune_test");
    embed->add_option("--out", e_out, "output archive");

    CLI11_PARSE(app, argc, argv);

    return cli::guarded_main([&]() {
        pipe::ExperimentConfig threads_cfg;
        threads_cfg.threads = threads;
        pipe::apply_thread_config(threads_cfg, false);
        if (train->parsed()) {
            const fen::FenVariant variant = fen::variant_from_string(variant_str);
            data::DatasetManifest manifest = data::DatasetManifest::parse(manifest_path);
            data::QueryPredicate pred;
            pred.split = data::Split::train;
            data::SampleSet tr = data::load_samples(manifest, data::query(manifest, pred));
            dae::DaeModel dm;
            if (variant == fen::FenVariant::denoiser) {
                check(!dae_ckpt.empty(), "fen train: denoiser variant needs --dae");
                dm = dae::DaeModel::load(dae_ckpt);
                tr.x = dae::residual_batch(dm, tr.x);
            }
            fen::FenConfig cfg;
            cfg.seed = seed;
            if (epochs > 0) cfg.epochs = epochs;
            fen::FenModel model =
                fen::train_fen(tr, variant, cfg, manifest.label_space.size(), true);
            model.save(out_ckpt);
            std::printf("trained %s FEN -> %s (final supcon %.4f)\n", variant_str.c_str(),
                        out_ckpt.c_str(), model.loss_curve.back());
        } else {
            fen::FenModel model = fen::FenModel::load(e_ckpt);
            data::DatasetManifest manifest = data::DatasetManifest::parse(e_manifest);
            data::QueryPredicate pred;
            pred.split = data::split_from_string(e_split);
            data::SampleSet samples = data::load_samples(manifest, data::query(manifest, pred));
            check(samples.size() > 0, "fen embed: split is empty");
            dae::DaeModel dm;
            dae::DaeModel* dmp = nullptr;
            if (model.variant == fen::FenVariant::denoiser) {
                check(!e_dae.empty(), "fen embed: denoiser variant needs --dae");
                dm = dae::DaeModel::load(e_dae);
                dmp = &dm;
            }
            eval::EmbeddedSet set = eval::embed_samples(model, dmp, samples);
            eval::save_embeddings(e_out, set, manifest.label_space);
            std::printf("wrote %d embedding rows to %s\n", set.class_embed.dim(0), e_out.c_str());
        }
        return 0;
    });
}

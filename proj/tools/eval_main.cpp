#include "common.hpp"
#include "gda/dae/dae.hpp"
#include "gda/eval/experiments.hpp"
#include "gda/eval/plots.hpp"
#include "gda/pipeline/pipeline.hpp"

#include <cstdio>
#include <filesystem>

using namespace gda;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"evaluation harness: regime reports, ablation table, exports"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "evaluate a trained pipeline on one regime");
    std::string regime_str = "crossseed", r_fen, r_clf, r_dae, r_manifest, r_out = "reports";
    int threads = 0;
    run->add_option("--regime", regime_str, "closed|crossseed|finetune");
    run->add_option("--fen", r_fen, "FEN checkpoint")->required();
    run->add_option("--clf", r_clf, "classifier checkpoint")->required();
    run->add_option("--dae", r_dae, "DAE checkpoint (denoiser variant)");
    run->add_option("--manifest", r_manifest, "dataset manifest")->required();
    run->add_option("--out", r_out, "output directory");
    run->add_option("--threads", threads, "worker threads (0 = hardware)");

    auto* ablation = app.add_subcommand("ablation", "train and score the five-configuration table");
    std::string a_manifest, a_out = "reports", a_dae;
    int a_fen_epochs = -1, a_cnn_epochs = -1;
    ablation->add_option("--manifest", a_manifest, "dataset manifest")->required();
    ablation->add_option("--out", a_out, "output directory");
    ablation->add_option("--dae", a_dae, "optional pre-trained DAE checkpoint");
    ablation->add_option("--fen-epochs", a_fen_epochs, "override FEN epochs");
    ablation->add_option("--cnn-epochs", a_cnn_epochs, "override simple-CNN epochs");

    CLI11_PARSE(app, argc, argv);

    return cli::guarded_main([&]() {
        pipe::ExperimentConfig threads_cfg;
        threads_cfg.threads = threads;
        pipe::apply_thread_config(threads_cfg, false);
        if (run->parsed()) {
            eval::Regime regime = eval::Regime::cross_seed;
            if (regime_str == "closed")
                regime = eval::Regime::closed_set;
            else if (regime_str == "crossseed")
                regime = eval::Regime::cross_seed;
            else if (regime_str == "finetune")
                regime = eval::Regime::finetune;
            else
                fail("unknown regime '" + regime_str + "'");

            data::DatasetManifest manifest = data::DatasetManifest::parse(r_manifest);
            fen::FenModel fen_model = fen::FenModel::load(r_fen);
            clf::AttributionClassifier clf_model = clf::AttributionClassifier::load(r_clf);
            dae::DaeModel dae_model;
            dae::DaeModel* dmp = nullptr;
            if (fen_model.variant == fen::FenVariant::denoiser) {
                check(!r_dae.empty(), "eval run: denoiser variant needs --dae");
                dae_model = dae::DaeModel::load(r_dae);
                dmp = &dae_model;
            }
            eval::PipelineFn f = eval::make_gda_pipeline(dmp, fen_model, clf_model);
            eval::EvalReport rep = eval::evaluate(f, manifest, regime);
            fs::create_directories(r_out);
            const std::string name = eval::to_string(regime);
            rep.save((fs::path(r_out) / (name + ".json")).string());
            eval::export_confusion(rep, (fs::path(r_out) / ("confusion_" + name)).string());
            std::printf("%s: accuracy %.4f macro_f1 %.4f -> %s\n", name.c_str(), rep.accuracy,
                        rep.macro_f1, r_out.c_str());
        } else {
            data::DatasetManifest manifest = data::DatasetManifest::parse(a_manifest);
            dae::DaeModel dae_model;
            if (!a_dae.empty()) {
                dae_model = dae::DaeModel::load(a_dae);
            } else {
                data::QueryPredicate tp;
                tp.split = data::Split::train;
                tp.label = std::string(data::kRealClass);
                data::SampleSet tr = data::load_samples(manifest, data::query(manifest, tp));
                data::QueryPredicate hp;
                hp.split = data::Split::closed_test;
                hp.label = std::string(data::kRealClass);
                data::SampleSet hold = data::load_samples(manifest, data::query(manifest, hp));
                dae::DaeConfig dc;
                dae_model = dae::train_dae(tr, hold, dc, true);
            }
            eval::AblationConfig cfg;
            cfg.verbose = true;
            if (a_fen_epochs > 0) cfg.fen.epochs = a_fen_epochs;
            if (a_cnn_epochs > 0) cfg.cnn.epochs = a_cnn_epochs;
            eval::AblationTable table = eval::ablation_suite(manifest, dae_model, cfg);
            fs::create_directories(a_out);
            table.save((fs::path(a_out) / "ablation.json").string());
            for (const auto& leg : table.legs) {
                if (leg.ok)
                    std::printf("%-24s closed %.4f cross %.4f f1 %.4f\n", leg.name.c_str(),
                                leg.closed_accuracy, leg.cross_accuracy, leg.cross_macro_f1);
                else
                    std::printf("%-24s FAILED: %s\n", leg.name.c_str(), leg.error.c_str());
            }
        }
        return 0;
    });
}

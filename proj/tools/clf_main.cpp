#include "common.hpp"
#include "gda/clf/classifier.hpp"
#include "gda/dae/dae.hpp"
#include "gda/eval/experiments.hpp"
#include "gda/pipeline/pipeline.hpp"

#include <json.hpp>

#include <cstdio>
#include <iostream>

using namespace gda;

int main(int argc, char** argv) {
    CLI::App app{"attribution classifier: train on frozen embeddings, predict single images"};
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "train the classifier head");
    std::string embeddings_path, out_ckpt = "clf.gdat";
    int epochs = -1;
    uint64_t seed = 1;
    train->add_option("--embeddings", embeddings_path, "embedding archive from `fen embed`")
        ->required();
    train->add_option("--out", out_ckpt, "output checkpoint");
    train->add_option("--epochs", epochs, "override default epochs");
    train->add_option("--seed", seed, "training seed");

    auto* predict = app.add_subcommand("predict", "attribute one image");
    std::string p_fen, p_clf, p_dae, p_image;
    predict->add_option("--fen", p_fen, "FEN checkpoint")->required();
    predict->add_option("--clf", p_clf, "classifier checkpoint")->required();
    predict->add_option("--dae", p_dae, "DAE checkpoint (denoiser variant)");
    predict->add_option("--image", p_image, "PNG image path")->required();

    CLI11_PARSE(app, argc, argv);

    return cli::guarded_main([&]() {
        if (train->parsed()) {
            eval::LoadedEmbeddings set = eval::load_embeddings(embeddings_path);
            clf::ClfConfig cfg;
            cfg.seed = seed;
            if (epochs > 0) cfg.epochs = epochs;
            clf::AttributionClassifier model =
                clf::train_classifier(set.class_embed, set.labels, set.label_space, cfg, true);
            model.save(out_ckpt);
            std::printf("trained classifier -> %s (train accuracy %.4f)\n", out_ckpt.c_str(),
                        model.train_accuracy);
        } else {
            fen::FenModel fen_model = fen::FenModel::load(p_fen);
            clf::AttributionClassifier clf_model = clf::AttributionClassifier::load(p_clf);
            dae::DaeModel dae_model;
            dae::DaeModel* dmp = nullptr;
            if (fen_model.variant == fen::FenVariant::denoiser) {
                check(!p_dae.empty(), "clf predict: denoiser variant needs --dae");
                dae_model = dae::DaeModel::load(p_dae);
                dmp = &dae_model;
            }
            const Image img = load_png(p_image);
            Tensor x({1, img.c, img.h, img.w});
            image_into_tensor(img, x, 0);

            eval::PipelineFn f = eval::make_gda_pipeline(dmp, fen_model, clf_model);
            fen::FenInput input;
            if (dmp) {
                input.x = dae::residual_batch(*dmp, x);
                input.is_residual = true;
            } else {
                input.x = x;
            }
            auto [ce, pe] = fen_model.forward(input);
            clf::Prediction pred = clf::predict(clf_model, ce);

            nlohmann::json out = {
                {"image", p_image},
                {"label", clf_model.label_space.classes[static_cast<size_t>(pred.label)]},
                {"probs", nlohmann::json::object()}};
            for (size_t i = 0; i < pred.probs.size(); ++i)
                out["probs"][clf_model.label_space.classes[i]] = pred.probs[i];
            std::cout << out.dump() << "\n";
        }
        return 0;
    });
}

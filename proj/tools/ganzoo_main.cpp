#include "common.hpp"
#include "gda/ganzoo/ganzoo.hpp"
#include "gda/pipeline/pipeline.hpp"

#include <cstdio>

using namespace gda;

int main(int argc, char** argv) {
    CLI::App app{"seed-controlled generator instances: train, fine-tune, sample"};
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "train one generator instance");
    std::string family_id, data_dir, out_dir = ".";
    int seed = 1, epochs = -1, threads = 0;
    train->add_option("--family", family_id, "family id (dcgan|wgan|sngan|progan_nn)")->required();
    train->add_option("--seed", seed, "training seed")->required();
    train->add_option("--epochs", epochs, "override family default epochs");
    train->add_option("--data", data_dir, "folder of real PNG images")->required();
    train->add_option("--out", out_dir, "output directory for the checkpoint");
    train->add_option("--threads", threads, "worker threads (0 = hardware)");

    auto* finetune = app.add_subcommand("finetune", "resume an instance for extra epochs");
    std::string ft_ckpt, ft_data, ft_out;
    int extra_epochs = 10;
    finetune->add_option("--ckpt", ft_ckpt, "source checkpoint")->required();
    finetune->add_option("--extra-epochs", extra_epochs, "additional epochs")->required();
    finetune->add_option("--data", ft_data, "the same real training folder")->required();
    finetune->add_option("--out", ft_out, "output checkpoint path")->required();

    auto* sample = app.add_subcommand("sample", "sample labeled images from a checkpoint");
    std::string s_ckpt, s_out;
    int n = 1000;
    uint64_t noise_seed = 1;
    sample->add_option("--ckpt", s_ckpt, "generator checkpoint")->required();
    sample->add_option("--n", n, "number of images")->required();
    sample->add_option("--noise-seed", noise_seed, "sampling seed")->required();
    sample->add_option("--out", s_out, "output directory (PNGs + provenance sidecar)")->required();

    CLI11_PARSE(app, argc, argv);

    return cli::guarded_main([&]() {
        pipe::ExperimentConfig threads_cfg;
        threads_cfg.threads = threads;
        pipe::apply_thread_config(threads_cfg, false);
        if (train->parsed()) {
            auto families = ganzoo::default_families();
            ganzoo::GeneratorFamily family = ganzoo::family_by_id(families, family_id);
            if (epochs > 0) family.train.epochs = epochs;
            Tensor real = cli::load_png_folder(data_dir);
            const std::string ckpt =
                out_dir + "/" + family_id + "_s" + std::to_string(seed) + ".gdat";
            auto inst = ganzoo::train_instance(family, seed, real, ckpt, true);
            std::printf("trained %s seed %d -> %s (fingerprint %s)\n", inst.family_id.c_str(),
                        inst.seed, inst.checkpoint_path.c_str(),
                        inst.training_fingerprint.c_str());
        } else if (finetune->parsed()) {
            Tensor real = cli::load_png_folder(ft_data);
            auto inst = ganzoo::fine_tune_instance(ft_ckpt, extra_epochs, real, ft_out, true);
            std::printf("fine-tuned %s seed %d to %d epochs -> %s\n", inst.family_id.c_str(),
                        inst.seed, inst.epochs_trained, inst.checkpoint_path.c_str());
        } else if (sample->parsed()) {
            ganzoo::sample_images(s_ckpt, n, noise_seed, s_out);
            std::printf("wrote %d images to %s\n", n, s_out.c_str());
        }
        return 0;
    });
}

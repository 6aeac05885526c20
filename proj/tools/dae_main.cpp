#include "common.hpp"
#include "gda/core/archive.hpp"
#include "gda/dae/dae.hpp"
#include "gda/pipeline/pipeline.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace gda;
namespace fs = std::filesystem;

namespace {

// `dae train` accepts a bare folder of real PNGs; entries get real-label
// provenance and the tail fraction becomes the held-out MAE check.
int run_train(const std::string& data_dir, const std::string& out_ckpt, int epochs) {
    Tensor x = cli::load_png_folder(data_dir);
    const int n = x.dim(0);
    const int holdout = std::max(1, n / 10);
    check(n > holdout, "dae train: need more than " + std::to_string(holdout) + " images");

    data::ManifestEntry proto;
    proto.prov.label = data::kRealClass;
    proto.prov.family = data::kRealClass;
    std::vector<data::ManifestEntry> storage(static_cast<size_t>(n), proto);

    auto subset = [&](int from, int count) {
        data::SampleSet s;
        const int64_t per = x.numel() / n;
        s.x = Tensor({count, x.dim(1), x.dim(2), x.dim(3)});
        std::copy(x.data() + per * from, x.data() + per * (from + count), s.x.data());
        s.labels.assign(static_cast<size_t>(count), 0);
        for (int i = 0; i < count; ++i)
            s.entries.push_back(&storage[static_cast<size_t>(from + i)]);
        return s;
    };
    data::SampleSet train = subset(0, n - holdout);
    data::SampleSet hold = subset(n - holdout, holdout);

    dae::DaeConfig cfg;
    if (epochs > 0) cfg.epochs = epochs;
    dae::DaeModel model = dae::train_dae(train, hold, cfg, true);
    model.save(out_ckpt);
    std::printf("trained DAE -> %s (train mae %.4f, holdout mae %.4f)\n", out_ckpt.c_str(),
                model.final_train_mae, model.holdout_mae);
    return 0;
}

// Residual archives: one file per batch, float maps plus a provenance index.
int run_residual(const std::string& ckpt, const std::string& in_dir, const std::string& out_dir) {
    dae::DaeModel model = dae::DaeModel::load(ckpt);
    std::vector<fs::path> files;
    for (const auto& p : fs::recursive_directory_iterator(in_dir))
        if (p.is_regular_file() && p.path().extension() == ".png") files.push_back(p.path());
    std::sort(files.begin(), files.end());
    check(!files.empty(), "dae residual: no PNG images under " + in_dir);
    fs::create_directories(out_dir);

    const int batch = 256;
    int file_index = 0;
    for (size_t at = 0; at < files.size(); at += batch) {
        const int b = static_cast<int>(std::min<size_t>(batch, files.size() - at));
        Tensor x({b, model.channels, model.height, model.width});
        nlohmann::json index = nlohmann::json::array();
        for (int i = 0; i < b; ++i) {
            const Image img = load_png(files[at + static_cast<size_t>(i)].string());
            check(img.h == model.height && img.w == model.width,
                  "dae residual: shape mismatch for " + files[at + static_cast<size_t>(i)].string());
            image_into_tensor(img, x, i);
            index.push_back(files[at + static_cast<size_t>(i)].string());
        }
        Tensor r = dae::residual_batch(model, x);
        TensorArchive ar;
        ar.put("residuals", r);
        ar.put_meta(nlohmann::json{{"kind", "residual_batch"}, {"files", index}}.dump());
        char name[64];
        std::snprintf(name, sizeof(name), "residuals_%04d.gdat", file_index++);
        ar.save((fs::path(out_dir) / name).string());
    }
    std::printf("wrote %d residual archives to %s\n", file_index, out_dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"denoising autoencoder: train on real images, emit residual maps"};
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "train the DAE on a folder of real images");
    std::string data_dir, out_ckpt = "dae.gdat";
    int epochs = -1, threads = 0;
    train->add_option("--data", data_dir, "folder of real PNG images")->required();
    train->add_option("--out", out_ckpt, "output checkpoint");
    train->add_option("--epochs", epochs, "override default epochs");
    train->add_option("--threads", threads, "worker threads (0 = hardware)");

    auto* residual = app.add_subcommand("residual", "compute residual maps for a folder");
    std::string r_ckpt, r_in, r_out;
    residual->add_option("--ckpt", r_ckpt, "DAE checkpoint")->required();
    residual->add_option("--in", r_in, "input image folder")->required();
    residual->add_option("--out", r_out, "output folder for residual archives")->required();

    CLI11_PARSE(app, argc, argv);

    return cli::guarded_main([&]() {
        pipe::ExperimentConfig threads_cfg;
        threads_cfg.threads = threads;
        pipe::apply_thread_config(threads_cfg, false);
        if (train->parsed()) return run_train(data_dir, out_ckpt, epochs);
        return run_residual(r_ckpt, r_in, r_out);
    });
}

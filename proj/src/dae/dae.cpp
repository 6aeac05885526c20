#include "gda/dae/dae.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>

#include "gda/core/archive.hpp"
#include "gda/nn/losses.hpp"
#include "gda/nn/optim.hpp"

using nlohmann::json;

namespace gda::dae {

namespace {

using namespace gda::nn;

Tensor gather(const Tensor& all, const std::vector<int>& order, int start, int count) {
    const int64_t per = all.numel() / all.dim(0);
    Tensor out({count, all.dim(1), all.dim(2), all.dim(3)});
    for (int i = 0; i < count; ++i) {
        const int src = order[static_cast<size_t>(start + i)];
        std::copy(all.data() + per * src, all.data() + per * (src + 1), out.data() + per * i);
    }
    return out;
}

Tensor corrupt(const Tensor& x, float sigma, Rng& rng) {
    Tensor y(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) {
        const float v = x[i] + sigma * rng.normal();
        y[i] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    }
    return y;
}

float batch_mae(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) s += std::abs(a[i] - b[i]);
    return static_cast<float>(s / static_cast<double>(a.numel()));
}

json config_json(const DaeConfig& c) {
    return json{{"epochs", c.epochs},          {"batch", c.batch},
                {"lr", c.lr},                  {"noise_sigma", c.noise_sigma},
                {"target_mae", c.target_mae},  {"plateau_patience", c.plateau_patience},
                {"min_improvement", c.min_improvement}, {"seed", c.seed}};
}

DaeConfig config_from_json(const json& j) {
    DaeConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.batch = j.at("batch").get<int>();
    c.lr = j.at("lr").get<float>();
    c.noise_sigma = j.at("noise_sigma").get<float>();
    c.target_mae = j.at("target_mae").get<float>();
    c.plateau_patience = j.at("plateau_patience").get<int>();
    c.min_improvement = j.at("min_improvement").get<float>();
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

} // namespace

// Encoder: 3 convs (two strided); decoder: 4 convs with nearest upsampling
// back to input resolution and a sigmoid squash.
nn::Net build_dae_net(int channels, Rng& rng) {
    Net net;
    net.add<Conv2d>(channels, 32, 3, 1, 1, false, rng);
    net.add<BatchNorm2d>(32);
    net.add<ReLU>();
    net.add<Conv2d>(32, 64, 3, 2, 1, false, rng);
    net.add<BatchNorm2d>(64);
    net.add<ReLU>();
    net.add<Conv2d>(64, 128, 3, 2, 1, false, rng);
    net.add<BatchNorm2d>(128);
    net.add<ReLU>();

    net.add<NearestUp2x>();
    net.add<Conv2d>(128, 64, 3, 1, 1, false, rng);
    net.add<BatchNorm2d>(64);
    net.add<ReLU>();
    net.add<NearestUp2x>();
    net.add<Conv2d>(64, 32, 3, 1, 1, false, rng);
    net.add<BatchNorm2d>(32);
    net.add<ReLU>();
    net.add<Conv2d>(32, 16, 3, 1, 1, false, rng);
    net.add<BatchNorm2d>(16);
    net.add<ReLU>();
    net.add<Conv2d>(16, channels, 3, 1, 1, true, rng);
    net.add<Sigmoid>();
    return net;
}

DaeModel train_dae(const data::SampleSet& real_train, const data::SampleSet& real_holdout,
                   const DaeConfig& cfg, bool verbose) {
    check(real_train.size() > 0, "train_dae: empty training stream");
    for (size_t i = 0; i < real_train.entries.size(); ++i)
        check(real_train.entries[i]->prov.is_real(),
              "train_dae: DAE must train on real only; found '" +
                  real_train.entries[i]->prov.label + "' sample");
    for (const auto* e : real_holdout.entries)
        check(e->prov.is_real(), "train_dae: holdout stream contains a non-real sample");

    DaeModel model;
    model.channels = real_train.x.dim(1);
    model.height = real_train.x.dim(2);
    model.width = real_train.x.dim(3);
    model.config = cfg;
    Rng init(cfg.seed, "dae/init");
    model.net = build_dae_net(model.channels, init);

    Adam opt(model.net.params(), cfg.lr);
    const int n = real_train.size();
    const int batch = std::min(cfg.batch, n);
    const int steps = n / batch;
    check(steps > 0, "train_dae: not enough images for one batch");

    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    float best = std::numeric_limits<float>::max();
    int stall = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng order_rng(cfg.seed, "dae/order/" + std::to_string(epoch));
        Rng noise_rng(cfg.seed, "dae/noise/" + std::to_string(epoch));
        order_rng.shuffle(order);
        double mae_sum = 0.0;
        for (int step = 0; step < steps; ++step) {
            Tensor clean = gather(real_train.x, order, step * batch, batch);
            Tensor noisy = corrupt(clean, cfg.noise_sigma, noise_rng);
            model.net.zero_grads();
            Tensor recon = model.net.forward(noisy, true);
            Tensor d;
            const float mae = nn::mae_loss(recon, clean, d);
            check(std::isfinite(mae), "train_dae: non-finite loss, aborting");
            model.net.backward(d);
            opt.step();
            mae_sum += mae;
        }
        const float epoch_mae = static_cast<float>(mae_sum / steps);
        model.final_train_mae = epoch_mae;
        if (verbose) std::printf("  [dae] epoch %d: train mae %.5f\n", epoch, epoch_mae);

        if (epoch_mae < best - cfg.min_improvement) {
            best = epoch_mae;
            stall = 0;
        } else {
            ++stall;
            check(!(epoch_mae > best * 1.5f && stall >= cfg.plateau_patience),
                  "train_dae: diverging (MAE " + std::to_string(epoch_mae) +
                      " not decreasing over " + std::to_string(cfg.plateau_patience) +
                      " epochs, best " + std::to_string(best) + ")");
            if (stall >= cfg.plateau_patience) {
                if (verbose) std::printf("  [dae] early stop at epoch %d (plateau)\n", epoch);
                break;
            }
        }
    }

    if (real_holdout.size() > 0) {
        Tensor recon = reconstruct(model, real_holdout.x);
        model.holdout_mae = batch_mae(recon, real_holdout.x);
        check(model.holdout_mae < cfg.target_mae,
              "train_dae: held-out MAE " + std::to_string(model.holdout_mae) +
                  " exceeds bound " + std::to_string(cfg.target_mae));
    }
    return model;
}

Tensor reconstruct(DaeModel& model, const Tensor& x) {
    check(x.rank() == 4 && x.dim(1) == model.channels && x.dim(2) == model.height &&
              x.dim(3) == model.width,
          "reconstruct: input shape does not match model");
    // chunked to bound activation memory on large splits
    const int n = x.dim(0);
    const int chunk = 512;
    if (n <= chunk) return model.net.forward(x, false);
    Tensor out({n, model.channels, model.height, model.width});
    const int64_t per = out.numel() / n;
    for (int at = 0; at < n; at += chunk) {
        const int b = std::min(chunk, n - at);
        Tensor xin({b, model.channels, model.height, model.width});
        std::copy(x.data() + per * at, x.data() + per * (at + b), xin.data());
        Tensor y = model.net.forward(xin, false);
        std::copy(y.data(), y.data() + y.numel(), out.data() + per * at);
    }
    return out;
}

Tensor residual_batch(DaeModel& model, const Tensor& x) {
    Tensor recon = reconstruct(model, x);
    Tensor r(x.shape());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < x.numel(); ++i) r[i] = std::abs(x[i] - recon[i]);
    return r;
}

ResidualMap residual(DaeModel& model, const Tensor& single_image, const data::Provenance& prov) {
    check(single_image.rank() == 4 && single_image.dim(0) == 1,
          "residual: expected a single (1,C,H,W) image");
    ResidualMap rm;
    rm.values = residual_batch(model, single_image);
    rm.source_provenance = prov;
    return rm;
}

void DaeModel::save(const std::string& path) const {
    TensorArchive ar;
    net.save_into(ar, "dae");
    json meta = {{"kind", "dae_model"},
                 {"h", height},
                 {"w", width},
                 {"c", channels},
                 {"config", config_json(config)},
                 {"final_train_mae", final_train_mae},
                 {"holdout_mae", holdout_mae},
                 {"fake_samples_seen", fake_samples_seen}};
    ar.put_meta(meta.dump(2));
    ar.save(path);
}

DaeModel DaeModel::load(const std::string& path) {
    TensorArchive ar = TensorArchive::load(path);
    json meta = json::parse(ar.meta());
    check(meta.value("kind", "") == "dae_model", "dae: not a DAE checkpoint: " + path);
    DaeModel m;
    m.height = meta.at("h").get<int>();
    m.width = meta.at("w").get<int>();
    m.channels = meta.at("c").get<int>();
    m.config = config_from_json(meta.at("config"));
    m.final_train_mae = meta.at("final_train_mae").get<float>();
    m.holdout_mae = meta.at("holdout_mae").get<float>();
    m.fake_samples_seen = meta.at("fake_samples_seen").get<int64_t>();
    Rng dummy(1);
    m.net = build_dae_net(m.channels, dummy);
    m.net.load_from(ar, "dae");
    return m;
}

} // namespace gda::dae

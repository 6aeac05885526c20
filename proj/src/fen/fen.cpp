#include "gda/fen/fen.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <map>

#include "gda/core/archive.hpp"
#include "gda/nn/optim.hpp"

using nlohmann::json;

namespace gda::fen {

namespace {

using namespace gda::nn;

json config_json(const FenConfig& c) {
    return json{{"epochs", c.epochs},
                {"batch_sources", c.batch_sources},
                {"lr", c.lr},
                {"momentum", c.momentum},
                {"cosine_decay", c.cosine_decay},
                {"tau", c.tau},
                {"crop_pad", c.crop_pad},
                {"flip", c.flip},
                {"reduction", c.reduction == SupConReduction::sum ? "sum" : "mean"},
                {"seed", c.seed}};
}

FenConfig config_from_json(const json& j) {
    FenConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.batch_sources = j.at("batch_sources").get<int>();
    c.lr = j.at("lr").get<float>();
    c.momentum = j.at("momentum").get<float>();
    c.cosine_decay = j.at("cosine_decay").get<bool>();
    c.tau = j.at("tau").get<float>();
    c.crop_pad = j.at("crop_pad").get<int>();
    c.flip = j.at("flip").get<bool>();
    c.reduction = j.at("reduction").get<std::string>() == "sum" ? SupConReduction::sum
                                                                : SupConReduction::mean_over_anchors;
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

// Random horizontal flip plus pad-and-crop with edge replication. Mild on
// purpose: heavier photometric augmentation would erase generator traces.
void augment_into(const Tensor& src, int src_index, Tensor& dst, int dst_index, int pad,
                  bool flip_enabled, Rng& rng) {
    const int c = src.dim(1), h = src.dim(2), w = src.dim(3);
    const int64_t per = static_cast<int64_t>(c) * h * w;
    const float* in = src.data() + per * src_index;
    float* out = dst.data() + per * dst_index;

    const bool flip = flip_enabled && rng.uniform() < 0.5;
    int oy = 0, ox = 0;
    if (pad > 0) {
        oy = rng.uniform_int(2 * pad + 1) - pad;
        ox = rng.uniform_int(2 * pad + 1) - pad;
    }
    for (int ci = 0; ci < c; ++ci) {
        const float* ip = in + static_cast<int64_t>(ci) * h * w;
        float* op = out + static_cast<int64_t>(ci) * h * w;
        for (int y = 0; y < h; ++y) {
            int sy = y + oy;
            sy = sy < 0 ? 0 : (sy >= h ? h - 1 : sy);
            for (int x = 0; x < w; ++x) {
                int sx = x + ox;
                sx = sx < 0 ? 0 : (sx >= w ? w - 1 : sx);
                const int tx = flip ? (w - 1 - x) : x;
                op[y * w + tx] = ip[sy * w + sx];
            }
        }
    }
}

// Per-class index queues; every batch draws the same number of sources per
// class so P(i) is never empty and classes stay balanced within a batch.
class StratifiedSampler {
public:
    StratifiedSampler(const std::vector<int>& labels, int num_classes, int batch_sources,
                      uint64_t seed)
        : num_classes_(num_classes), seed_(seed) {
        by_class_.resize(static_cast<size_t>(num_classes));
        for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
            const int y = labels[static_cast<size_t>(i)];
            check(y >= 0 && y < num_classes, "fen sampler: label out of range");
            by_class_[static_cast<size_t>(y)].push_back(i);
        }
        per_class_ = batch_sources / num_classes;
        check(per_class_ >= 2,
              "fen sampler: batch too small for " + std::to_string(num_classes) +
                  " classes (need >= 2 sources per class per batch)");
        for (int cls = 0; cls < num_classes; ++cls)
            check(static_cast<int>(by_class_[static_cast<size_t>(cls)].size()) >= 2,
                  "fen sampler: class " + std::to_string(cls) +
                      " has fewer than 2 samples; P(i) would be empty");
        steps_per_epoch_ =
            std::max<int>(1, static_cast<int>(labels.size()) / (per_class_ * num_classes));
    }

    int steps_per_epoch() const { return steps_per_epoch_; }
    int batch_sources() const { return per_class_ * num_classes_; }

    void start_epoch(int epoch) {
        Rng rng(seed_, "fen/sampler/" + std::to_string(epoch));
        cursors_.assign(static_cast<size_t>(num_classes_), 0);
        shuffled_ = by_class_;
        for (auto& q : shuffled_) rng.shuffle(q);
    }

    // next batch of source indices + labels, wrapping per-class queues
    void next(std::vector<int>& sources, std::vector<int>& labels) {
        sources.clear();
        labels.clear();
        for (int cls = 0; cls < num_classes_; ++cls) {
            auto& q = shuffled_[static_cast<size_t>(cls)];
            auto& cur = cursors_[static_cast<size_t>(cls)];
            for (int k = 0; k < per_class_; ++k) {
                if (cur >= q.size()) cur = 0;
                sources.push_back(q[cur++]);
                labels.push_back(cls);
            }
        }
    }

private:
    int num_classes_;
    int per_class_ = 0;
    int steps_per_epoch_ = 0;
    uint64_t seed_;
    std::vector<std::vector<int>> by_class_;
    std::vector<std::vector<int>> shuffled_;
    std::vector<size_t> cursors_;
};

} // namespace

std::string to_string(FenVariant v) { return v == FenVariant::vanilla ? "vanilla" : "denoiser"; }

FenVariant variant_from_string(const std::string& s) {
    if (s == "vanilla") return FenVariant::vanilla;
    if (s == "denoiser") return FenVariant::denoiser;
    fail("unknown FEN variant '" + s + "'");
}

// Reduced-stride residual encoder for 32x32 inputs; the final 1x1 conv
// widens to the 2048-dim pooled classification-head feature.
nn::Net build_fen_encoder(int channels, Rng& rng) {
    Net net;
    net.add<Conv2d>(channels, 16, 3, 1, 1, false, rng);
    net.add<BatchNorm2d>(16);
    net.add<ReLU>();

    auto stage = [&rng](int cin, int cout) {
        Net main;
        main.add<Conv2d>(cin, cout, 3, 2, 1, false, rng);
        main.add<BatchNorm2d>(cout);
        main.add<ReLU>();
        main.add<Conv2d>(cout, cout, 3, 1, 1, false, rng);
        main.add<BatchNorm2d>(cout);
        Net shortcut;
        shortcut.add<Conv2d>(cin, cout, 1, 2, 0, false, rng);
        shortcut.add<BatchNorm2d>(cout);
        return std::pair<Net, Net>(std::move(main), std::move(shortcut));
    };

    auto s1 = stage(16, 32);
    net.add<ResidualBlock>(std::move(s1.first), std::move(s1.second)); // 16x16
    auto s2 = stage(32, 64);
    net.add<ResidualBlock>(std::move(s2.first), std::move(s2.second)); // 8x8
    auto s3 = stage(64, 128);
    net.add<ResidualBlock>(std::move(s3.first), std::move(s3.second)); // 4x4

    net.add<Conv2d>(128, kClassEmbedDim, 1, 1, 0, false, rng);
    net.add<BatchNorm2d>(kClassEmbedDim);
    net.add<ReLU>();
    net.add<GlobalAvgPool>();
    return net;
}

nn::Net build_fen_projection(Rng& rng) {
    Net net;
    net.add<Linear>(kClassEmbedDim, 256, true, rng);
    net.add<ReLU>();
    net.add<Linear>(256, kProjEmbedDim, true, rng);
    net.add<L2Normalize>();
    return net;
}

std::pair<Tensor, Tensor> FenModel::forward(const FenInput& input) {
    const bool want_residual = variant == FenVariant::denoiser;
    check(input.is_residual == want_residual,
          std::string("fen: ") + to_string(variant) + " variant expects " +
              (want_residual ? "residual" : "image") + " input");
    check(input.x.rank() == 4 && input.x.dim(1) == channels && input.x.dim(2) == height &&
              input.x.dim(3) == width,
          "fen: input shape does not match training shape");

    const int n = input.x.dim(0);
    const int chunk = 512;
    if (n <= chunk) {
        Tensor ce = encoder.forward(input.x, false);
        Tensor pe = projection.forward(ce, false);
        return {std::move(ce), std::move(pe)};
    }
    Tensor ce({n, kClassEmbedDim});
    Tensor pe({n, kProjEmbedDim});
    const int64_t per = input.x.numel() / n;
    for (int at = 0; at < n; at += chunk) {
        const int b = std::min(chunk, n - at);
        Tensor xin({b, channels, height, width});
        std::copy(input.x.data() + per * at, input.x.data() + per * (at + b), xin.data());
        Tensor c = encoder.forward(xin, false);
        Tensor p = projection.forward(c, false);
        std::copy(c.data(), c.data() + c.numel(), ce.data() + static_cast<int64_t>(at) * kClassEmbedDim);
        std::copy(p.data(), p.data() + p.numel(), pe.data() + static_cast<int64_t>(at) * kProjEmbedDim);
    }
    return {std::move(ce), std::move(pe)};
}

FenModel train_fen(const data::SampleSet& train, FenVariant variant, const FenConfig& cfg,
                   int num_classes, bool verbose) {
    check(train.size() > 0, "train_fen: empty training set");
    check(cfg.tau > 0.0f, "train_fen: tau must be positive");
    {
        std::map<int, int> present;
        for (int y : train.labels) ++present[y];
        check(static_cast<int>(present.size()) == num_classes,
              "train_fen: train split covers " + std::to_string(present.size()) + " of " +
                  std::to_string(num_classes) + " classes");
    }

    FenModel model;
    model.variant = variant;
    model.channels = train.x.dim(1);
    model.height = train.x.dim(2);
    model.width = train.x.dim(3);
    model.config = cfg;
    Rng init(cfg.seed, "fen/init");
    model.encoder = build_fen_encoder(model.channels, init);
    model.projection = build_fen_projection(init);

    std::vector<ParamRef> params = model.encoder.params("enc");
    for (auto& p : model.projection.params("proj")) params.push_back(p);
    Sgd opt(params, cfg.lr, cfg.momentum);

    StratifiedSampler sampler(train.labels, num_classes, cfg.batch_sources, cfg.seed);
    const int bs = sampler.batch_sources();
    const int64_t per = train.x.numel() / train.size();

    std::vector<int> sources, labels;
    Tensor views({2 * bs, model.channels, model.height, model.width});

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        sampler.start_epoch(epoch);
        Rng aug_rng(cfg.seed, "fen/aug/" + std::to_string(epoch));
        opt.set_lr(cfg.cosine_decay ? cosine_lr(cfg.lr, epoch, cfg.epochs) : cfg.lr);
        double loss_sum = 0.0;
        for (int step = 0; step < sampler.steps_per_epoch(); ++step) {
            sampler.next(sources, labels);
            // two independently augmented views: rows [0,bs) and [bs,2bs)
            ContrastiveBatch batch;
            batch.tau = cfg.tau;
            batch.labels.resize(static_cast<size_t>(2 * bs));
            batch.view_pair.resize(static_cast<size_t>(2 * bs));
            for (int i = 0; i < bs; ++i) {
                augment_into(train.x, sources[static_cast<size_t>(i)], views, i, cfg.crop_pad,
                             cfg.flip, aug_rng);
                augment_into(train.x, sources[static_cast<size_t>(i)], views, bs + i, cfg.crop_pad,
                             cfg.flip, aug_rng);
                batch.labels[static_cast<size_t>(i)] = labels[static_cast<size_t>(i)];
                batch.labels[static_cast<size_t>(bs + i)] = labels[static_cast<size_t>(i)];
                batch.view_pair[static_cast<size_t>(i)] = bs + i;
                batch.view_pair[static_cast<size_t>(bs + i)] = i;
            }

            model.encoder.zero_grads();
            model.projection.zero_grads();
            Tensor ce = model.encoder.forward(views, true);
            batch.z = model.projection.forward(ce, true);

            Tensor dz;
            const float loss = supcon_loss_grad(batch, dz, cfg.reduction);
            check(std::isfinite(loss), "train_fen: non-finite contrastive loss, aborting");
            Tensor dce = model.projection.backward(dz);
            model.encoder.backward(dce);
            opt.step();
            loss_sum += loss;
        }
        const float epoch_loss = static_cast<float>(loss_sum / sampler.steps_per_epoch());
        model.loss_curve.push_back(epoch_loss);
        if (verbose)
            std::printf("  [fen %s] epoch %d: supcon %.4f (lr %.5f)\n",
                        to_string(variant).c_str(), epoch, epoch_loss, opt.lr());
    }

    check(model.loss_curve.size() < 2 || model.loss_curve.back() < model.loss_curve.front(),
          "train_fen: final epoch loss did not improve on the first epoch");
    (void)per;
    return model;
}

void FenModel::save(const std::string& path) const {
    TensorArchive ar;
    encoder.save_into(ar, "enc");
    projection.save_into(ar, "proj");
    json meta = {{"kind", "fen_model"},
                 {"variant", to_string(variant)},
                 {"h", height},
                 {"w", width},
                 {"c", channels},
                 {"config", config_json(config)},
                 {"loss_curve", loss_curve}};
    ar.put_meta(meta.dump(2));
    ar.save(path);
}

FenModel FenModel::load(const std::string& path) {
    TensorArchive ar = TensorArchive::load(path);
    json meta = json::parse(ar.meta());
    check(meta.value("kind", "") == "fen_model", "fen: not a FEN checkpoint: " + path);
    FenModel m;
    m.variant = variant_from_string(meta.at("variant").get<std::string>());
    m.height = meta.at("h").get<int>();
    m.width = meta.at("w").get<int>();
    m.channels = meta.at("c").get<int>();
    m.config = config_from_json(meta.at("config"));
    m.loss_curve = meta.at("loss_curve").get<std::vector<float>>();
    Rng dummy(1);
    m.encoder = build_fen_encoder(m.channels, dummy);
    m.projection = build_fen_projection(dummy);
    m.encoder.load_from(ar, "enc");
    m.projection.load_from(ar, "proj");
    return m;
}

} // namespace gda::fen

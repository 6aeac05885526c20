#include "gda/ganzoo/ganzoo.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "gda/core/archive.hpp"
#include "gda/core/digest.hpp"
#include "gda/core/image.hpp"
#include "gda/nn/losses.hpp"
#include "gda/nn/optim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gda::ganzoo {

namespace {

json config_json(const GeneratorFamily& f) {
    return json{{"family_id", f.family_id},
                {"arch", to_string(f.arch)},
                {"loss", to_string(f.loss)},
                {"epochs", f.train.epochs},
                {"batch", f.train.batch},
                {"zdim", f.train.zdim},
                {"lr_g", f.train.lr_g},
                {"lr_d", f.train.lr_d},
                {"beta1", f.train.beta1},
                {"n_critic", f.train.n_critic},
                {"clip", f.train.clip},
                {"collapse_std", f.train.collapse_std}};
}

GeneratorFamily family_from_json(const json& j) {
    GeneratorFamily f;
    f.family_id = j.at("family_id").get<std::string>();
    f.arch = arch_from_string(j.at("arch").get<std::string>());
    f.loss = loss_from_string(j.at("loss").get<std::string>());
    f.train.epochs = j.at("epochs").get<int>();
    f.train.batch = j.at("batch").get<int>();
    f.train.zdim = j.at("zdim").get<int>();
    f.train.lr_g = j.at("lr_g").get<float>();
    f.train.lr_d = j.at("lr_d").get<float>();
    f.train.beta1 = j.at("beta1").get<float>();
    f.train.n_critic = j.at("n_critic").get<int>();
    f.train.clip = j.at("clip").get<float>();
    f.train.collapse_std = j.at("collapse_std").get<float>();
    return f;
}

std::string fingerprint(const GeneratorFamily& f, int seed, int epochs) {
    Digest d;
    d.update(config_json(f).dump());
    d.update_pod(seed);
    d.update_pod(epochs);
    return d.hex();
}

void fill_noise(Tensor& z, Rng& rng) {
    for (int64_t i = 0; i < z.numel(); ++i) z[i] = rng.normal();
}

// Real pixels live in [0,1]; generators emit tanh range.
Tensor to_signed(const Tensor& x01) {
    Tensor y(x01.shape());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < x01.numel(); ++i) y[i] = x01[i] * 2.0f - 1.0f;
    return y;
}

Tensor to_unit(const Tensor& xs) {
    Tensor y(xs.shape());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < xs.numel(); ++i) {
        const float v = (xs[i] + 1.0f) * 0.5f;
        y[i] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    }
    return y;
}

Tensor gather_batch(const Tensor& all, const std::vector<int>& order, int start, int count) {
    const int c = all.dim(1), h = all.dim(2), w = all.dim(3);
    const int64_t per = static_cast<int64_t>(c) * h * w;
    Tensor out({count, c, h, w});
    for (int i = 0; i < count; ++i) {
        const int src = order[static_cast<size_t>(start + i)];
        std::copy(all.data() + per * src, all.data() + per * (src + 1), out.data() + per * i);
    }
    return out;
}

struct TrainState {
    nn::Net g, d;
    std::unique_ptr<nn::Optimizer> g_opt, d_opt;
};

std::unique_ptr<nn::Optimizer> make_gan_optimizer(const GeneratorFamily& f, nn::Net& net,
                                                  float lr) {
    if (f.loss == GanLoss::wasserstein)
        return std::make_unique<nn::RmsProp>(net.params(), lr);
    return std::make_unique<nn::Adam>(net.params(), lr, f.train.beta1);
}

// One adversarial pass over the data; epoch_index seeds the shuffle and
// noise streams so resumed training continues the same sequence.
void run_epoch(const GeneratorFamily& f, TrainState& st, const Tensor& real, int seed,
               int epoch_index, bool verbose) {
    const int n = real.dim(0);
    const int batch = std::min(f.train.batch, n);
    const int steps = n / batch;
    check(steps > 0, "gan: not enough real images for one batch");

    Rng order_rng(static_cast<uint64_t>(seed),
                  f.family_id + "/order/" + std::to_string(epoch_index));
    Rng noise_rng(static_cast<uint64_t>(seed),
                  f.family_id + "/noise/" + std::to_string(epoch_index));
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    order_rng.shuffle(order);

    Tensor z({batch, f.train.zdim});
    double d_loss_sum = 0.0, g_loss_sum = 0.0;
    int used = 0;

    for (int step = 0; step < steps; ++step) {
        // discriminator / critic update(s)
        float d_loss = 0.0f;
        for (int ci = 0; ci < f.train.n_critic; ++ci) {
            const int at = ((step * f.train.n_critic + ci) % steps) * batch;
            Tensor xr = to_signed(gather_batch(real, order, at, batch));
            st.d.zero_grads();

            Tensor out_r = st.d.forward(xr, true);
            Tensor dr;
            float lr_term = 0.0f;
            switch (f.loss) {
                case GanLoss::bce: lr_term = nn::bce_logits(out_r, 0.9f, dr); break;
                case GanLoss::wasserstein: lr_term = nn::neg_mean_value(out_r, dr); break;
                case GanLoss::hinge_sn: lr_term = nn::hinge_real(out_r, dr); break;
            }
            st.d.backward(dr);

            fill_noise(z, noise_rng);
            Tensor xf = st.g.forward(z, true);
            Tensor out_f = st.d.forward(xf, true);
            Tensor df;
            float lf_term = 0.0f;
            switch (f.loss) {
                case GanLoss::bce: lf_term = nn::bce_logits(out_f, 0.0f, df); break;
                case GanLoss::wasserstein: lf_term = nn::mean_value(out_f, df); break;
                case GanLoss::hinge_sn: lf_term = nn::hinge_fake(out_f, df); break;
            }
            st.d.backward(df);
            st.d_opt->step();
            if (f.loss == GanLoss::wasserstein) {
                auto dp = st.d.params();
                nn::clip_params(dp, f.train.clip);
            }
            d_loss = lr_term + lf_term;
            check(std::isfinite(d_loss), "gan: non-finite discriminator loss, aborting");
        }

        // generator update
        st.g.zero_grads();
        st.d.zero_grads();
        fill_noise(z, noise_rng);
        Tensor xf = st.g.forward(z, true);
        Tensor out_f = st.d.forward(xf, true);
        Tensor df;
        float g_loss = 0.0f;
        switch (f.loss) {
            case GanLoss::bce: g_loss = nn::bce_logits(out_f, 1.0f, df); break;
            case GanLoss::wasserstein: g_loss = nn::neg_mean_value(out_f, df); break;
            case GanLoss::hinge_sn: g_loss = nn::neg_mean_value(out_f, df); break;
        }
        check(std::isfinite(g_loss), "gan: non-finite generator loss, aborting");
        Tensor dxf = st.d.backward(df);
        st.g.backward(dxf);
        st.g_opt->step();

        d_loss_sum += d_loss;
        g_loss_sum += g_loss;
        ++used;
    }
    if (verbose)
        std::printf("  [%s seed %d] epoch %d: d_loss %.4f g_loss %.4f\n", f.family_id.c_str(),
                    seed, epoch_index, d_loss_sum / used, g_loss_sum / used);
}

void save_checkpoint(const std::string& path, const GeneratorFamily& f, int seed, int epochs,
                     const nn::Net& g, const nn::Net& d, uint64_t data_digest) {
    TensorArchive ar;
    g.save_into(ar, "g");
    d.save_into(ar, "d");
    json meta = {{"kind", "ganzoo_instance"},
                 {"family", config_json(f)},
                 {"seed", seed},
                 {"epochs_trained", epochs},
                 {"data_digest", data_digest},
                 {"fingerprint", fingerprint(f, seed, epochs)}};
    ar.put_meta(meta.dump(2));
    fs::create_directories(fs::path(path).parent_path().empty()
                               ? "."
                               : fs::path(path).parent_path().string());
    ar.save(path);
}

uint64_t tensor_digest(const Tensor& t) {
    Digest d;
    d.update(t.data(), static_cast<size_t>(t.numel()) * sizeof(float));
    return d.value();
}

float diversity_of(const Tensor& batch01) {
    const int n = batch01.dim(0);
    const int64_t per = batch01.numel() / n;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const float* p = batch01.data() + per * i;
        double m = 0.0;
        for (int64_t k = 0; k < per; ++k) m += p[k];
        m /= static_cast<double>(per);
        sum += m;
        sq += m * m;
    }
    const double mean = sum / n;
    return static_cast<float>(std::sqrt(std::max(0.0, sq / n - mean * mean)));
}

} // namespace

GeneratorInstance train_instance(const GeneratorFamily& family, int seed,
                                 const Tensor& real_images, const std::string& out_ckpt,
                                 bool verbose) {
    check(real_images.rank() == 4 && real_images.dim(0) > 0,
          "train_instance: real data must be a non-empty (N,C,H,W) batch");
    check(seed > 0, "train_instance: seed must be positive");

    Rng ginit(static_cast<uint64_t>(seed), family.family_id + "/init_g");
    Rng dinit(static_cast<uint64_t>(seed), family.family_id + "/init_d");
    TrainState st;
    st.g = family.build_generator(ginit);
    st.d = family.build_discriminator(dinit);
    st.g_opt = make_gan_optimizer(family, st.g, family.train.lr_g);
    st.d_opt = make_gan_optimizer(family, st.d, family.train.lr_d);

    for (int e = 0; e < family.train.epochs; ++e)
        run_epoch(family, st, real_images, seed, e, verbose);

    // Collapse check on a held-out noise stream.
    {
        Tensor z({256, family.train.zdim});
        Rng zrng(static_cast<uint64_t>(seed), family.family_id + "/collapse_check");
        fill_noise(z, zrng);
        Tensor fake = to_unit(st.g.forward(z, false));
        const float div = diversity_of(fake);
        check(div >= family.train.collapse_std,
              "train_instance: generator collapse detected for " + family.family_id + " seed " +
                  std::to_string(seed) + " (sample diversity " + std::to_string(div) + " < " +
                  std::to_string(family.train.collapse_std) + ")");
    }

    save_checkpoint(out_ckpt, family, seed, family.train.epochs, st.g, st.d,
                    tensor_digest(real_images));

    GeneratorInstance inst;
    inst.family_id = family.family_id;
    inst.seed = seed;
    inst.epochs_trained = family.train.epochs;
    inst.checkpoint_path = out_ckpt;
    inst.training_fingerprint = fingerprint(family, seed, family.train.epochs);
    inst.weight_digest = st.g.weight_digest();
    return inst;
}

LoadedInstance load_instance(const std::string& ckpt_path) {
    TensorArchive ar = TensorArchive::load(ckpt_path);
    check(!ar.meta().empty(), "ganzoo: checkpoint has no metadata: " + ckpt_path);
    json meta = json::parse(ar.meta());
    check(meta.value("kind", "") == "ganzoo_instance",
          "ganzoo: not a generator checkpoint: " + ckpt_path);
    LoadedInstance li;
    li.family = family_from_json(meta.at("family"));
    li.seed = meta.at("seed").get<int>();
    li.epochs_trained = meta.at("epochs_trained").get<int>();
    li.meta_json = ar.meta();
    Rng dummy(1);
    li.generator = li.family.build_generator(dummy);
    li.discriminator = li.family.build_discriminator(dummy);
    li.generator.load_from(ar, "g");
    li.discriminator.load_from(ar, "d");
    return li;
}

GeneratorInstance instance_info(const std::string& ckpt_path) {
    LoadedInstance li = load_instance(ckpt_path);
    GeneratorInstance inst;
    inst.family_id = li.family.family_id;
    inst.seed = li.seed;
    inst.epochs_trained = li.epochs_trained;
    inst.checkpoint_path = ckpt_path;
    inst.training_fingerprint = json::parse(li.meta_json).at("fingerprint").get<std::string>();
    inst.weight_digest = li.generator.weight_digest();
    return inst;
}

GeneratorInstance fine_tune_instance(const std::string& ckpt_path, int extra_epochs,
                                     const Tensor& real_images, const std::string& out_ckpt,
                                     bool verbose) {
    check(extra_epochs > 0, "fine_tune_instance: extra_epochs must be positive");
    check(real_images.rank() == 4 && real_images.dim(0) > 0,
          "fine_tune_instance: real data must be non-empty");
    LoadedInstance li = load_instance(ckpt_path);

    TrainState st;
    st.g = std::move(li.generator);
    st.d = std::move(li.discriminator);
    st.g_opt = make_gan_optimizer(li.family, st.g, li.family.train.lr_g);
    st.d_opt = make_gan_optimizer(li.family, st.d, li.family.train.lr_d);

    for (int e = 0; e < extra_epochs; ++e)
        run_epoch(li.family, st, real_images, li.seed, li.epochs_trained + e, verbose);

    const int total = li.epochs_trained + extra_epochs;
    save_checkpoint(out_ckpt, li.family, li.seed, total, st.g, st.d,
                    tensor_digest(real_images));

    GeneratorInstance inst;
    inst.family_id = li.family.family_id;
    inst.seed = li.seed;
    inst.epochs_trained = total;
    inst.checkpoint_path = out_ckpt;
    inst.training_fingerprint = fingerprint(li.family, li.seed, total);
    inst.weight_digest = st.g.weight_digest();
    return inst;
}

Tensor sample_batch(LoadedInstance& inst, int n, uint64_t noise_seed) {
    check(n > 0, "sample_images: n must be positive");
    Rng rng(noise_seed, inst.family.family_id + "/sample");
    const int chunk = 256;
    Tensor out;
    std::vector<float> buf;
    int done = 0;
    int h = 0, w = 0;
    while (done < n) {
        const int b = std::min(chunk, n - done);
        Tensor z({b, inst.family.train.zdim});
        for (int64_t i = 0; i < z.numel(); ++i) z[i] = rng.normal();
        Tensor fake = to_unit(inst.generator.forward(z, false));
        h = fake.dim(2);
        w = fake.dim(3);
        buf.insert(buf.end(), fake.vec().begin(), fake.vec().end());
        done += b;
    }
    return Tensor({n, 3, h, w}, std::move(buf));
}

Tensor sample_batch(const std::string& ckpt_path, int n, uint64_t noise_seed) {
    LoadedInstance li = load_instance(ckpt_path);
    return sample_batch(li, n, noise_seed);
}

void sample_images(const std::string& ckpt_path, int n, uint64_t noise_seed,
                   const std::string& out_dir) {
    LoadedInstance li = load_instance(ckpt_path);
    json meta = json::parse(li.meta_json);
    const int base_epochs = meta.at("epochs_trained").get<int>();
    // base/finetune breakdown: the family config records initial epochs
    const int initial_epochs = li.family.train.epochs;
    const int extra = std::max(0, base_epochs - initial_epochs);

    Tensor batch = sample_batch(li, n, noise_seed);
    fs::create_directories(out_dir);
    std::ofstream sidecar(fs::path(out_dir) / "provenance.jsonl");
    check(sidecar.good(), "sample_images: cannot write sidecar in " + out_dir);
    for (int i = 0; i < n; ++i) {
        char name[96];
        std::snprintf(name, sizeof(name), "%s_s%d_e%d_k%llu_%06d.png", li.family.family_id.c_str(),
                      li.seed, base_epochs, static_cast<unsigned long long>(noise_seed), i);
        Image img = tensor_slice_to_image(batch, i);
        save_png((fs::path(out_dir) / name).string(), img);
        json rec = {{"file", name},
                    {"label", li.family.family_id},
                    {"family", li.family.family_id},
                    {"seed", li.seed},
                    {"base_epochs", initial_epochs},
                    {"finetune_extra_epochs", extra},
                    {"noise_seed", noise_seed}};
        sidecar << rec.dump() << "\n";
    }
    check(sidecar.good(), "sample_images: sidecar write failed");
}

float sample_diversity(LoadedInstance& inst, int n, uint64_t noise_seed) {
    Tensor batch = sample_batch(inst, n, noise_seed);
    return diversity_of(batch);
}

} // namespace gda::ganzoo

#include "gda/ganzoo/ganzoo.hpp"

#include "gda/nn/layers.hpp"

namespace gda::ganzoo {

std::string to_string(GenArch a) {
    return a == GenArch::tconv ? "tconv" : "nn_residual";
}

std::string to_string(GanLoss l) {
    switch (l) {
        case GanLoss::bce: return "bce";
        case GanLoss::wasserstein: return "wasserstein";
        case GanLoss::hinge_sn: return "hinge_sn";
    }
    fail("unreachable gan loss");
}

GenArch arch_from_string(const std::string& s) {
    if (s == "tconv") return GenArch::tconv;
    if (s == "nn_residual") return GenArch::nn_residual;
    fail("unknown generator arch '" + s + "'");
}

GanLoss loss_from_string(const std::string& s) {
    if (s == "bce") return GanLoss::bce;
    if (s == "wasserstein") return GanLoss::wasserstein;
    if (s == "hinge_sn") return GanLoss::hinge_sn;
    fail("unknown gan loss '" + s + "'");
}

namespace {

using namespace gda::nn;

// z -> 4x4x128 -> stride-2 transposed convs (zero-stuff + k4 conv) -> 32x32x3.
Net build_tconv_generator(int zdim, Rng& rng) {
    Net g;
    g.add<Linear>(zdim, 128 * 4 * 4, true, rng);
    g.add<Reshape>(128, 4, 4);
    g.add<BatchNorm2d>(128);
    g.add<ReLU>();
    g.add<ZeroStuff2x>();
    g.add<Conv2d>(128, 64, 4, 1, 2, false, rng);
    g.add<BatchNorm2d>(64);
    g.add<ReLU>();
    g.add<ZeroStuff2x>();
    g.add<Conv2d>(64, 32, 4, 1, 2, false, rng);
    g.add<BatchNorm2d>(32);
    g.add<ReLU>();
    g.add<ZeroStuff2x>();
    g.add<Conv2d>(32, 3, 4, 1, 2, true, rng);
    g.add<Tanh>();
    return g;
}

// z -> 4x4x128 -> nearest-neighbor upsample + 3x3 conv with residual blocks.
Net build_nn_residual_generator(int zdim, Rng& rng) {
    Net g;
    g.add<Linear>(zdim, 128 * 4 * 4, true, rng);
    g.add<Reshape>(128, 4, 4);
    g.add<BatchNorm2d>(128);
    g.add<ReLU>();

    auto res_block = [&rng](int ch) {
        Net main;
        main.add<Conv2d>(ch, ch, 3, 1, 1, false, rng);
        main.add<BatchNorm2d>(ch);
        main.add<ReLU>();
        main.add<Conv2d>(ch, ch, 3, 1, 1, false, rng);
        main.add<BatchNorm2d>(ch);
        return main;
    };

    g.add<NearestUp2x>();
    g.add<Conv2d>(128, 64, 3, 1, 1, false, rng);
    g.add<BatchNorm2d>(64);
    g.add<ReLU>();
    g.add<ResidualBlock>(res_block(64), Net{});
    g.add<NearestUp2x>();
    g.add<Conv2d>(64, 32, 3, 1, 1, false, rng);
    g.add<BatchNorm2d>(32);
    g.add<ReLU>();
    g.add<ResidualBlock>(res_block(32), Net{});
    g.add<NearestUp2x>();
    g.add<Conv2d>(32, 16, 3, 1, 1, false, rng);
    g.add<BatchNorm2d>(16);
    g.add<ReLU>();
    g.add<Conv2d>(16, 3, 3, 1, 1, true, rng);
    g.add<Tanh>();
    return g;
}

// 32x32x3 -> stride-2 convs -> scalar score (logit or critic value).
Net build_discriminator(bool spectral, bool batchnorm, Rng& rng) {
    Net d;
    d.add<Conv2d>(3, 32, 4, 2, 1, true, rng, spectral);
    d.add<LeakyReLU>(0.2f);
    d.add<Conv2d>(32, 64, 4, 2, 1, !batchnorm, rng, spectral);
    if (batchnorm) d.add<BatchNorm2d>(64);
    d.add<LeakyReLU>(0.2f);
    d.add<Conv2d>(64, 128, 4, 2, 1, !batchnorm, rng, spectral);
    if (batchnorm) d.add<BatchNorm2d>(128);
    d.add<LeakyReLU>(0.2f);
    d.add<Flatten>();
    d.add<Linear>(128 * 4 * 4, 1, true, rng, spectral);
    return d;
}

} // namespace

nn::Net GeneratorFamily::build_generator(Rng& rng) const {
    switch (arch) {
        case GenArch::tconv: return build_tconv_generator(train.zdim, rng);
        case GenArch::nn_residual: return build_nn_residual_generator(train.zdim, rng);
    }
    fail("unreachable arch");
}

nn::Net GeneratorFamily::build_discriminator(Rng& rng) const {
    switch (loss) {
        case GanLoss::bce: return build_discriminator(false, true, rng);
        case GanLoss::wasserstein: return build_discriminator(false, true, rng);
        case GanLoss::hinge_sn: return build_discriminator(true, false, rng);
    }
    fail("unreachable loss");
}

std::vector<GeneratorFamily> default_families() {
    GeneratorFamily dcgan{"dcgan", GenArch::tconv, GanLoss::bce, {}};

    GeneratorFamily wgan{"wgan", GenArch::tconv, GanLoss::wasserstein, {}};
    wgan.train.lr_g = 5e-5f;
    wgan.train.lr_d = 5e-5f;
    wgan.train.n_critic = 2;

    GeneratorFamily sngan{"sngan", GenArch::tconv, GanLoss::hinge_sn, {}};
    sngan.train.lr_d = 4e-4f;

    GeneratorFamily progan_nn{"progan_nn", GenArch::nn_residual, GanLoss::bce, {}};

    return {dcgan, wgan, sngan, progan_nn};
}

const GeneratorFamily& family_by_id(const std::vector<GeneratorFamily>& families,
                                    const std::string& id) {
    for (const auto& f : families)
        if (f.family_id == id) return f;
    fail("unknown generator family '" + id + "'");
}

void check_pairwise_distinct(const std::vector<GeneratorFamily>& families) {
    for (size_t i = 0; i < families.size(); ++i)
        for (size_t j = i + 1; j < families.size(); ++j) {
            const auto& a = families[i];
            const auto& b = families[j];
            check(a.family_id != b.family_id, "families: duplicate id " + a.family_id);
            check(a.arch != b.arch || a.loss != b.loss,
                  "families '" + a.family_id + "' and '" + b.family_id +
                      "' are architecturally indistinct");
        }
}

} // namespace gda::ganzoo

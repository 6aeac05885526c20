#include "gda/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace gda::synth {

namespace {

float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

struct Rgb {
    float r, g, b;
};

Rgb random_soft_color(Rng& rng, float lo, float hi) {
    return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

void box_blur(Image& img) {
    Image tmp = img;
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                float sum = 0.0f;
                int cnt = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int yy = y + dy, xx = x + dx;
                        if (yy < 0 || yy >= img.h || xx < 0 || xx >= img.w) continue;
                        sum += tmp.at(c, yy, xx);
                        ++cnt;
                    }
                img.at(c, y, x) = sum / static_cast<float>(cnt);
            }
}

} // namespace

Image synth_face(Rng& rng, int h, int w) {
    Image img(3, h, w);

    // background: diagonal gradient between two colors plus a low-frequency wave
    const Rgb bg0 = random_soft_color(rng, 0.05f, 0.95f);
    const Rgb bg1 = random_soft_color(rng, 0.05f, 0.95f);
    const float wf = rng.uniform(1.0f, 3.0f);
    const float wp = rng.uniform(0.0f, 6.28f);
    const float wamp = rng.uniform(0.0f, 0.08f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float t = (static_cast<float>(x) / w + static_cast<float>(y) / h) * 0.5f;
            const float wave = wamp * std::sin(wf * 6.2832f * static_cast<float>(x) / w + wp);
            img.at(0, y, x) = clamp01(bg0.r + t * (bg1.r - bg0.r) + wave);
            img.at(1, y, x) = clamp01(bg0.g + t * (bg1.g - bg0.g) + wave);
            img.at(2, y, x) = clamp01(bg0.b + t * (bg1.b - bg0.b) + wave);
        }

    // head: soft-edged ellipse, skin-ish tones with wide variation
    const float cx = w * rng.uniform(0.38f, 0.62f);
    const float cy = h * rng.uniform(0.40f, 0.60f);
    const float rx = w * rng.uniform(0.22f, 0.34f);
    const float ry = h * rng.uniform(0.28f, 0.42f);
    Rgb skin = {rng.uniform(0.45f, 0.95f), rng.uniform(0.35f, 0.75f), rng.uniform(0.25f, 0.65f)};
    if (skin.g > skin.r) std::swap(skin.g, skin.r);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float dx = (static_cast<float>(x) - cx) / rx;
            const float dy = (static_cast<float>(y) - cy) / ry;
            const float d = dx * dx + dy * dy;
            if (d < 1.3f) {
                const float a = clamp01((1.3f - d) / 0.4f);
                const float shade = 1.0f - 0.25f * clamp01(dy + 0.5f);
                img.at(0, y, x) = clamp01((1 - a) * img.at(0, y, x) + a * skin.r * shade);
                img.at(1, y, x) = clamp01((1 - a) * img.at(1, y, x) + a * skin.g * shade);
                img.at(2, y, x) = clamp01((1 - a) * img.at(2, y, x) + a * skin.b * shade);
            }
        }

    // hair cap
    if (rng.uniform() < 0.85) {
        const Rgb hair = random_soft_color(rng, 0.02f, 0.5f);
        const float hy = cy - ry * rng.uniform(0.35f, 0.65f);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const float dx = (static_cast<float>(x) - cx) / (rx * 1.08f);
                const float dy = (static_cast<float>(y) - cy) / (ry * 1.08f);
                if (dx * dx + dy * dy < 1.0f && y < hy) {
                    img.at(0, y, x) = hair.r;
                    img.at(1, y, x) = hair.g;
                    img.at(2, y, x) = hair.b;
                }
            }
    }

    // eyes
    const float eye_dx = rx * rng.uniform(0.35f, 0.5f);
    const float eye_y = cy - ry * rng.uniform(0.05f, 0.2f);
    const float eye_r = rng.uniform(1.0f, 2.2f);
    const float eye_v = rng.uniform(0.0f, 0.25f);
    for (int side = -1; side <= 1; side += 2) {
        const float ex = cx + side * eye_dx;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const float dx = static_cast<float>(x) - ex;
                const float dy = static_cast<float>(y) - eye_y;
                if (dx * dx + dy * dy < eye_r * eye_r)
                    for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = eye_v;
            }
    }

    // mouth: dark horizontal bar
    {
        const float my = cy + ry * rng.uniform(0.35f, 0.55f);
        const float mw = rx * rng.uniform(0.4f, 0.8f);
        const float mv = rng.uniform(0.05f, 0.4f);
        for (int y = static_cast<int>(my) - 1; y <= static_cast<int>(my); ++y)
            for (int x = static_cast<int>(cx - mw); x <= static_cast<int>(cx + mw); ++x)
                if (y >= 0 && y < h && x >= 0 && x < w) {
                    img.at(0, y, x) = clamp01(mv + 0.3f);
                    img.at(1, y, x) = mv * 0.5f;
                    img.at(2, y, x) = mv * 0.5f;
                }
    }

    box_blur(img);
    if (rng.uniform() < 0.5) box_blur(img);

    // sensor-ish noise
    for (auto& v : img.px) v = clamp01(v + 0.015f * rng.normal());
    return img;
}

void generate_corpus(const std::string& out_dir, const SynthConfig& cfg) {
    check(cfg.count > 0, "synth: count must be positive");
    fs::create_directories(out_dir);
    std::ofstream sidecar(fs::path(out_dir) / "provenance.jsonl");
    check(sidecar.good(), "synth: cannot write sidecar in " + out_dir);
    Rng rng(cfg.seed, "synth-corpus");
    for (int i = 0; i < cfg.count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "real_%06d.png", i);
        const Image img = synth_face(rng, cfg.height, cfg.width);
        save_png((fs::path(out_dir) / name).string(), img);
        sidecar << "{\"file\":\"" << name << "\",\"label\":\"real\",\"family\":\"real\"}\n";
    }
    check(sidecar.good(), "synth: sidecar write failed");
}

} // namespace gda::synth

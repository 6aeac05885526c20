#include "gda/eval/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace gda::eval {

namespace {

struct Rgb {
    float r, g, b;
};

// distinguishable fixed palette, cycled
const Rgb kPalette[] = {
    {0.85f, 0.30f, 0.30f}, {0.25f, 0.55f, 0.85f}, {0.30f, 0.70f, 0.35f},
    {0.85f, 0.65f, 0.20f}, {0.60f, 0.40f, 0.75f}, {0.20f, 0.70f, 0.70f},
    {0.75f, 0.35f, 0.60f}, {0.55f, 0.55f, 0.25f},
};

void fill_rect(Image& img, int x0, int y0, int x1, int y1, Rgb c) {
    x0 = std::max(0, x0);
    y0 = std::max(0, y0);
    x1 = std::min(img.w, x1);
    y1 = std::min(img.h, y1);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            img.at(0, y, x) = c.r;
            img.at(1, y, x) = c.g;
            img.at(2, y, x) = c.b;
        }
}

} // namespace

void export_confusion(const EvalReport& report, const std::string& out_base) {
    const int k = report.confusion.k;
    {
        std::ofstream tsv(out_base + ".tsv");
        check(tsv.good(), "export_confusion: cannot write " + out_base + ".tsv");
        tsv << "true\\pred";
        for (const auto& c : report.classes) tsv << '\t' << c;
        tsv << "\n";
        for (int t = 0; t < k; ++t) {
            tsv << report.classes[static_cast<size_t>(t)];
            for (int p = 0; p < k; ++p) tsv << '\t' << report.confusion.at(t, p);
            tsv << "\n";
        }
        tsv << "# accuracy\t" << report.accuracy << "\n# macro_f1\t" << report.macro_f1 << "\n";
    }

    const int cell = 48, margin = 12;
    const int side = k * cell + 2 * margin;
    Image img(3, side, side);
    fill_rect(img, 0, 0, side, side, {1.0f, 1.0f, 1.0f});
    for (int t = 0; t < k; ++t) {
        const int64_t rs = std::max<int64_t>(report.confusion.row_sum(t), 1);
        for (int p = 0; p < k; ++p) {
            const float frac =
                static_cast<float>(report.confusion.at(t, p)) / static_cast<float>(rs);
            // white (0) -> deep blue (1), diagonal tinted green
            Rgb c{1.0f - 0.85f * frac, 1.0f - (t == p ? 0.45f : 0.80f) * frac,
                  1.0f - (t == p ? 0.75f : 0.15f) * frac};
            fill_rect(img, margin + p * cell + 1, margin + t * cell + 1,
                      margin + (p + 1) * cell - 1, margin + (t + 1) * cell - 1, c);
        }
    }
    save_png(out_base + ".png", img);
}

void export_scatter(const std::vector<TsnePoint>& points, int num_labels,
                    const std::string& out_base) {
    check(!points.empty(), "export_scatter: no points");
    {
        std::ofstream tsv(out_base + ".tsv");
        check(tsv.good(), "export_scatter: cannot write " + out_base + ".tsv");
        tsv << "x\ty\tlabel\tfamily\tseed\tsplit\n";
        for (const auto& p : points)
            tsv << p.x << '\t' << p.y << '\t' << p.label << '\t' << p.family << '\t' << p.seed
                << '\t' << p.split << "\n";
    }

    float min_x = points[0].x, max_x = points[0].x, min_y = points[0].y, max_y = points[0].y;
    for (const auto& p : points) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    const float sx = max_x > min_x ? max_x - min_x : 1.0f;
    const float sy = max_y > min_y ? max_y - min_y : 1.0f;

    const int side = 640, margin = 16, dot = 3;
    Image img(3, side, side);
    fill_rect(img, 0, 0, side, side, {1.0f, 1.0f, 1.0f});
    const int span = side - 2 * margin;
    for (const auto& p : points) {
        const int px = margin + static_cast<int>((p.x - min_x) / sx * span);
        const int py = margin + static_cast<int>((p.y - min_y) / sy * span);
        Rgb c = kPalette[static_cast<size_t>(p.label % 8)];
        // cross-split points double ring: hollow square for non-train
        if (p.split != "train") {
            fill_rect(img, px - dot, py - dot, px + dot + 1, py + dot + 1, c);
            fill_rect(img, px - dot + 2, py - dot + 2, px + dot - 1, py + dot - 1,
                      {1.0f, 1.0f, 1.0f});
        } else {
            fill_rect(img, px - dot, py - dot, px + dot + 1, py + dot + 1, c);
        }
    }
    (void)num_labels;
    save_png(out_base + ".png", img);
}

} // namespace gda::eval

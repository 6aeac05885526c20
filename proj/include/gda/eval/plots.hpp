#pragma once

#include <string>
#include <vector>

#include "gda/core/image.hpp"
#include "gda/eval/metrics.hpp"

namespace gda::eval {

// Deterministic software-rendered PNG plots. The numeric grids are always
// written alongside; nothing downstream parses the images.

// Writes <out_base>.png (heatmap, row-normalized shading) and
// <out_base>.tsv (plain numeric grid with class names).
void export_confusion(const EvalReport& report, const std::string& out_base);

// Writes <out_base>.png (scatter colored by label) and <out_base>.tsv with
// rows (x, y, label, family, seed, split).
struct TsnePoint {
    float x = 0.0f, y = 0.0f;
    int label = 0;
    std::string family;
    std::string seed;
    std::string split;
};
void export_scatter(const std::vector<TsnePoint>& points, int num_labels,
                    const std::string& out_base);

} // namespace gda::eval

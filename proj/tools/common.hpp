#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <vector>

#include "gda/data/manifest.hpp"

namespace gda::cli {

// Loads every *.png under dir (sidecar-free folders welcome), sorted for
// determinism.
inline Tensor load_png_folder(const std::string& dir) {
    namespace fs = std::filesystem;
    check(fs::exists(dir), "folder does not exist: " + dir);
    std::vector<fs::path> files;
    for (const auto& p : fs::recursive_directory_iterator(dir))
        if (p.is_regular_file() && p.path().extension() == ".png") files.push_back(p.path());
    std::sort(files.begin(), files.end());
    check(!files.empty(), "no PNG images under " + dir);
    const Image first = load_png(files.front().string());
    Tensor x({static_cast<int>(files.size()), first.c, first.h, first.w});
#pragma omp parallel for schedule(dynamic, 16)
    for (int i = 0; i < static_cast<int>(files.size()); ++i) {
        const Image img = load_png(files[static_cast<size_t>(i)].string());
        check(img.h == first.h && img.w == first.w && img.c == first.c,
              "image shape mismatch: " + files[static_cast<size_t>(i)].string());
        image_into_tensor(img, x, i);
    }
    return x;
}

template <typename Fn>
int guarded_main(Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}

} // namespace gda::cli

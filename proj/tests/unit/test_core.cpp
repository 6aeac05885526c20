#include <doctest.h>

#include <filesystem>

#include "gda/core/archive.hpp"
#include "gda/core/digest.hpp"
#include "gda/core/image.hpp"
#include "gda/core/rng.hpp"
#include "gda/core/tensor.hpp"

using namespace gda;
namespace fs = std::filesystem;

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3, 4, 4});
    CHECK(t.numel() == 96);
    CHECK(t.dim(1) == 3);
    t.fill(2.5f);
    CHECK(t[95] == 2.5f);
    Tensor r = t.reshaped({6, 16});
    CHECK(r.dim(0) == 6);
    CHECK_THROWS(t.reshaped({5, 5}));
}

TEST_CASE("rng streams are deterministic and independent") {
    Rng a(42, "stream-a");
    Rng b(42, "stream-a");
    Rng c(42, "stream-b");
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        const uint64_t va = a.next_u64();
        all_equal = all_equal && va == b.next_u64();
        any_diff = any_diff || va != c.next_u64();
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("rng normal moments are sane") {
    Rng rng(7);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sq += v * v;
    }
    CHECK(std::abs(sum / n) < 0.05);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("rng shuffle is a permutation") {
    Rng rng(3);
    std::vector<int> v(100);
    for (int i = 0; i < 100; ++i) v[static_cast<size_t>(i)] = i;
    rng.shuffle(v);
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 100; ++i) CHECK(sorted[static_cast<size_t>(i)] == i);
}

TEST_CASE("tensor archive round trip with metadata") {
    const fs::path path = fs::temp_directory_path() / "gda_test_archive.gdat";
    TensorArchive ar;
    Tensor a({3, 5});
    Rng rng(1);
    for (int64_t i = 0; i < a.numel(); ++i) a[i] = rng.normal();
    ar.put("weights.a", a);
    ar.put("bias", Tensor::full({7}, 0.25f));
    ar.put_meta("{\"note\":\"round trip\"}");
    ar.save(path.string());

    TensorArchive back = TensorArchive::load(path.string());
    CHECK(back.size() == 2);
    CHECK(back.meta() == "{\"note\":\"round trip\"}");
    const Tensor& a2 = back.get("weights.a");
    REQUIRE(a2.shape() == a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) CHECK(a2[i] == a[i]);
    CHECK_THROWS_WITH(back.get("missing"), doctest::Contains("missing entry"));
    fs::remove(path);
}

TEST_CASE("png round trip is lossless at 8-bit") {
    const fs::path path = fs::temp_directory_path() / "gda_test_img.png";
    Image img(3, 16, 16);
    Rng rng(9);
    for (auto& v : img.px) v = static_cast<float>(rng.uniform());
    quantize_u8(img);
    save_png(path.string(), img);
    Image back = load_png(path.string());
    REQUIRE(back.h == 16);
    REQUIRE(back.w == 16);
    for (size_t i = 0; i < img.px.size(); ++i) CHECK(back.px[i] == doctest::Approx(img.px[i]).epsilon(1e-6));
    fs::remove(path);
}

TEST_CASE("digest is order sensitive") {
    Digest a, b;
    a.update("ab");
    b.update("ba");
    CHECK(a.value() != b.value());
    CHECK(Digest().update("ab").hex() == Digest().update("ab").hex());
}

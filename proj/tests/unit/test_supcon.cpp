#include <doctest.h>

#include <cmath>
#include <vector>

#include "gda/core/rng.hpp"
#include "gda/fen/supcon.hpp"

using namespace gda;
using namespace gda::fen;

namespace {

// Independent oracle: direct triple loop over (i, p, a), double precision,
// no vectorization or log-sum-exp tricks shared with the implementation.
double oracle_supcon(const std::vector<double>& z, int n2, int d, const std::vector<int>& labels,
                     double tau) {
    auto dot = [&](int i, int j) {
        double s = 0.0;
        for (int k = 0; k < d; ++k)
            s += z[static_cast<size_t>(i) * d + k] * z[static_cast<size_t>(j) * d + k];
        return s;
    };
    double total = 0.0;
    for (int i = 0; i < n2; ++i) {
        std::vector<int> positives;
        for (int p = 0; p < n2; ++p)
            if (p != i && labels[static_cast<size_t>(p)] == labels[static_cast<size_t>(i)])
                positives.push_back(p);
        REQUIRE(!positives.empty());
        double inner = 0.0;
        for (int p : positives) {
            double denom = 0.0;
            for (int a = 0; a < n2; ++a)
                if (a != i) denom += std::exp(dot(i, a) / tau);
            inner += std::log(std::exp(dot(i, p) / tau) / denom);
        }
        total += -inner / static_cast<double>(positives.size());
    }
    return total;
}

std::vector<double> random_unit_rows(int n2, int d, Rng& rng) {
    std::vector<double> z(static_cast<size_t>(n2) * d);
    for (int i = 0; i < n2; ++i) {
        double norm = 0.0;
        for (int k = 0; k < d; ++k) {
            const double v = rng.normal();
            z[static_cast<size_t>(i) * d + k] = v;
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (int k = 0; k < d; ++k) z[static_cast<size_t>(i) * d + k] /= norm;
    }
    return z;
}

// labels with two views per source and every class appearing >= twice
std::vector<int> paired_labels(int n_sources, int n_classes, Rng& rng) {
    std::vector<int> src(static_cast<size_t>(n_sources));
    for (int c = 0; c < n_classes; ++c) src[static_cast<size_t>(c % n_sources)] = c;
    for (int i = n_classes; i < n_sources; ++i)
        src[static_cast<size_t>(i)] = rng.uniform_int(n_classes);
    std::vector<int> out;
    for (int v : src) out.push_back(v);
    for (int v : src) out.push_back(v);
    return out;
}

} // namespace

TEST_CASE("single positive pair gives zero loss for any unit embeddings") {
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        auto z = random_unit_rows(2, 16, rng);
        std::vector<float> zf(z.begin(), z.end());
        std::vector<int> labels = {0, 0};
        const float loss = supcon_loss_raw<float>(zf.data(), 2, 16, labels.data(), 0.07f,
                                                  SupConReduction::sum, nullptr);
        CHECK(std::abs(loss) < 1e-9f);
    }
}

TEST_CASE("identical single-class embeddings give 2N ln(2N-1)") {
    for (int n2 : {4, 6, 8, 12}) {
        const int d = 8;
        std::vector<double> z(static_cast<size_t>(n2) * d, 0.0);
        for (int i = 0; i < n2; ++i) z[static_cast<size_t>(i) * d] = 1.0; // all equal unit vectors
        std::vector<int> labels(static_cast<size_t>(n2), 0);
        const double loss = supcon_loss_raw<double>(z.data(), n2, d, labels.data(), 0.07,
                                                    SupConReduction::sum, nullptr);
        CHECK(std::abs(loss - n2 * std::log(n2 - 1.0)) < 1e-9);
    }
    // the spec's worked case: 2N=4 -> 4 ln 3
    std::vector<double> z(4 * 3, 0.0);
    for (int i = 0; i < 4; ++i) z[static_cast<size_t>(i) * 3 + 1] = 1.0;
    std::vector<int> labels(4, 2);
    const double loss =
        supcon_loss_raw<double>(z.data(), 4, 3, labels.data(), 0.5, SupConReduction::sum, nullptr);
    CHECK(loss == doctest::Approx(4.0 * std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("vectorized loss equals the triple-loop oracle on random batches") {
    Rng rng(17);
    const double taus[] = {0.05, 0.07, 0.5};
    for (int trial = 0; trial < 100; ++trial) {
        const int n_sources = 2 + rng.uniform_int(7); // 2N <= 16
        const int n_classes = std::min(2 + rng.uniform_int(4), n_sources);
        const int n2 = 2 * n_sources;
        const int d = 4 + rng.uniform_int(12);
        const double tau = taus[trial % 3];
        auto z = random_unit_rows(n2, d, rng);
        auto labels = paired_labels(n_sources, n_classes, rng);

        const double expected = oracle_supcon(z, n2, d, labels, tau);
        const double got = supcon_loss_raw<double>(z.data(), n2, d, labels.data(), tau,
                                                   SupConReduction::sum, nullptr);
        CHECK(std::abs(got - expected) / std::max(1e-12, std::abs(expected)) < 1e-6);
    }
}

TEST_CASE("analytic gradient matches 64-bit central finite differences") {
    Rng rng(23);
    double max_rel = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int n_sources = 2 + rng.uniform_int(4);
        const int n_classes = std::min(2 + rng.uniform_int(3), n_sources);
        const int n2 = 2 * n_sources;
        const int d = 4 + rng.uniform_int(6);
        const double tau = trial % 2 ? 0.07 : 0.2;
        auto z = random_unit_rows(n2, d, rng);
        auto labels = paired_labels(n_sources, n_classes, rng);

        std::vector<double> grad(z.size());
        supcon_loss_raw<double>(z.data(), n2, d, labels.data(), tau, SupConReduction::sum,
                                grad.data());

        const double h = 1e-6;
        double grad_norm = 0.0;
        for (double g : grad) grad_norm = std::max(grad_norm, std::abs(g));
        for (size_t k = 0; k < z.size(); k += 3) { // probe a third of the coordinates
            auto zp = z, zm = z;
            zp[k] += h;
            zm[k] -= h;
            const double lp = supcon_loss_raw<double>(zp.data(), n2, d, labels.data(), tau,
                                                      SupConReduction::sum, nullptr);
            const double lm = supcon_loss_raw<double>(zm.data(), n2, d, labels.data(), tau,
                                                      SupConReduction::sum, nullptr);
            const double numeric = (lp - lm) / (2.0 * h);
            const double rel = std::abs(grad[k] - numeric) / std::max(1.0, grad_norm);
            max_rel = std::max(max_rel, rel);
        }
    }
    CHECK(max_rel < 1e-4);
}

TEST_CASE("permutation invariance") {
    Rng rng(29);
    const int n2 = 12, d = 16;
    auto z = random_unit_rows(n2, d, rng);
    auto labels = paired_labels(6, 3, rng);
    const double base =
        supcon_loss_raw<double>(z.data(), n2, d, labels.data(), 0.07, SupConReduction::sum, nullptr);

    std::vector<int> perm(n2);
    for (int i = 0; i < n2; ++i) perm[static_cast<size_t>(i)] = i;
    rng.shuffle(perm);
    std::vector<double> z2(z.size());
    std::vector<int> labels2(labels.size());
    for (int i = 0; i < n2; ++i) {
        const int src = perm[static_cast<size_t>(i)];
        labels2[static_cast<size_t>(i)] = labels[static_cast<size_t>(src)];
        for (int k = 0; k < d; ++k)
            z2[static_cast<size_t>(i) * d + k] = z[static_cast<size_t>(src) * d + k];
    }
    const double shuffled = supcon_loss_raw<double>(z2.data(), n2, d, labels2.data(), 0.07,
                                                    SupConReduction::sum, nullptr);
    CHECK(std::abs(base - shuffled) < 1e-9);
}

TEST_CASE("invariance to a common rotation of all embeddings") {
    Rng rng(31);
    const int n2 = 8, d = 6;
    auto z = random_unit_rows(n2, d, rng);
    auto labels = paired_labels(4, 2, rng);
    const double base =
        supcon_loss_raw<double>(z.data(), n2, d, labels.data(), 0.07, SupConReduction::sum, nullptr);

    // Gram-Schmidt a random matrix into an orthogonal Q
    std::vector<std::vector<double>> q(static_cast<size_t>(d), std::vector<double>(static_cast<size_t>(d)));
    for (auto& row : q)
        for (auto& v : row) v = rng.normal();
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < i; ++j) {
            double dot = 0.0;
            for (int k = 0; k < d; ++k) dot += q[static_cast<size_t>(i)][static_cast<size_t>(k)] * q[static_cast<size_t>(j)][static_cast<size_t>(k)];
            for (int k = 0; k < d; ++k) q[static_cast<size_t>(i)][static_cast<size_t>(k)] -= dot * q[static_cast<size_t>(j)][static_cast<size_t>(k)];
        }
        double norm = 0.0;
        for (int k = 0; k < d; ++k) norm += q[static_cast<size_t>(i)][static_cast<size_t>(k)] * q[static_cast<size_t>(i)][static_cast<size_t>(k)];
        norm = std::sqrt(norm);
        for (int k = 0; k < d; ++k) q[static_cast<size_t>(i)][static_cast<size_t>(k)] /= norm;
    }
    std::vector<double> zr(z.size(), 0.0);
    for (int i = 0; i < n2; ++i)
        for (int r = 0; r < d; ++r)
            for (int k = 0; k < d; ++k)
                zr[static_cast<size_t>(i) * d + r] +=
                    q[static_cast<size_t>(r)][static_cast<size_t>(k)] * z[static_cast<size_t>(i) * d + k];
    const double rotated = supcon_loss_raw<double>(zr.data(), n2, d, labels.data(), 0.07,
                                                   SupConReduction::sum, nullptr);
    CHECK(std::abs(base - rotated) / std::max(1e-12, std::abs(base)) < 1e-6);
}

TEST_CASE("error paths: lone class member, bad tau, broken batch invariants") {
    Rng rng(37);
    auto z = random_unit_rows(4, 8, rng);
    std::vector<float> zf(z.begin(), z.end());
    std::vector<int> lonely = {0, 0, 0, 1}; // class 1 has one member
    CHECK_THROWS_WITH(supcon_loss_raw<float>(zf.data(), 4, 8, lonely.data(), 0.07f,
                                             SupConReduction::sum, nullptr),
                      doctest::Contains("single sample"));
    std::vector<int> ok = {0, 0, 1, 1};
    CHECK_THROWS_WITH(supcon_loss_raw<float>(zf.data(), 4, 8, ok.data(), 0.0f,
                                             SupConReduction::sum, nullptr),
                      doctest::Contains("tau"));

    ContrastiveBatch batch;
    batch.z = Tensor({4, 8}, std::vector<float>(zf.begin(), zf.end()));
    batch.labels = ok;
    batch.view_pair = {1, 0, 3, 2};
    batch.tau = 0.07f;
    CHECK_NOTHROW(supcon_loss(batch));

    SUBCASE("odd batch") {
        batch.z = Tensor({3, 8});
        batch.labels = {0, 0, 0};
        batch.view_pair = {1, 0, 2};
        CHECK_THROWS_WITH(supcon_loss(batch), doctest::Contains("even"));
    }
    SUBCASE("non-unit rows") {
        batch.z[0] = 2.0f;
        CHECK_THROWS_WITH(supcon_loss(batch), doctest::Contains("unit norm"));
    }
    SUBCASE("view pair not an involution") {
        batch.view_pair = {1, 0, 2, 3};
        CHECK_THROWS_WITH(supcon_loss(batch), doctest::Contains("involution"));
    }
}

TEST_CASE("mean reduction is sum divided by 2N") {
    Rng rng(41);
    const int n2 = 10, d = 12;
    auto z = random_unit_rows(n2, d, rng);
    auto labels = paired_labels(5, 3, rng);
    const double s =
        supcon_loss_raw<double>(z.data(), n2, d, labels.data(), 0.07, SupConReduction::sum, nullptr);
    const double m = supcon_loss_raw<double>(z.data(), n2, d, labels.data(), 0.07,
                                             SupConReduction::mean_over_anchors, nullptr);
    CHECK(m == doctest::Approx(s / n2).epsilon(1e-12));
}

#include "gda/eval/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gda/core/rng.hpp"

namespace gda::eval {

namespace {

// Binary search for the Gaussian bandwidth matching the target perplexity.
void row_affinities(const std::vector<double>& d2_row, int i, double perplexity,
                    std::vector<double>& p_row) {
    const int n = static_cast<int>(d2_row.size());
    const double target_entropy = std::log(perplexity);
    double beta = 1.0, beta_lo = -1e30, beta_hi = 1e30;
    for (int iter = 0; iter < 64; ++iter) {
        double sum = 0.0, dsum = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j == i) {
                p_row[static_cast<size_t>(j)] = 0.0;
                continue;
            }
            const double p = std::exp(-beta * d2_row[static_cast<size_t>(j)]);
            p_row[static_cast<size_t>(j)] = p;
            sum += p;
            dsum += p * d2_row[static_cast<size_t>(j)];
        }
        sum = std::max(sum, 1e-300);
        const double entropy = std::log(sum) + beta * dsum / sum;
        const double diff = entropy - target_entropy;
        if (std::abs(diff) < 1e-5) break;
        if (diff > 0) {
            beta_lo = beta;
            beta = beta_hi > 1e29 ? beta * 2 : (beta + beta_hi) / 2;
        } else {
            beta_hi = beta;
            beta = beta_lo < -1e29 ? beta / 2 : (beta + beta_lo) / 2;
        }
    }
    double sum = 0.0;
    for (double v : p_row) sum += v;
    sum = std::max(sum, 1e-300);
    for (double& v : p_row) v /= sum;
}

} // namespace

Tensor tsne_fit(const Tensor& x, const TsneConfig& cfg) {
    const int n = x.dim(0);
    const int d = x.dim(1);
    check(n >= 50, "tsne: need at least 50 points");
    check(cfg.perplexity < static_cast<double>(n) / 3.0,
          "tsne: perplexity " + std::to_string(cfg.perplexity) + " too large for " +
              std::to_string(n) + " points");

    // pairwise squared distances
    std::vector<double> d2(static_cast<size_t>(n) * n, 0.0);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const float* xi = x.data() + static_cast<int64_t>(i) * d;
        for (int j = i + 1; j < n; ++j) {
            const float* xj = x.data() + static_cast<int64_t>(j) * d;
            double s = 0.0;
            for (int k = 0; k < d; ++k) {
                const double diff = static_cast<double>(xi[k]) - xj[k];
                s += diff * diff;
            }
            d2[static_cast<size_t>(i) * n + j] = s;
            d2[static_cast<size_t>(j) * n + i] = s;
        }
    }

    // symmetrized input affinities
    std::vector<double> p(static_cast<size_t>(n) * n, 0.0);
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < n; ++i) {
        std::vector<double> row(static_cast<size_t>(n));
        std::vector<double> d2row(d2.begin() + static_cast<size_t>(i) * n,
                                  d2.begin() + static_cast<size_t>(i + 1) * n);
        row_affinities(d2row, i, cfg.perplexity, row);
        for (int j = 0; j < n; ++j) p[static_cast<size_t>(i) * n + j] = row[static_cast<size_t>(j)];
    }
    double psum = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double v = (p[static_cast<size_t>(i) * n + j] + p[static_cast<size_t>(j) * n + i]) / 2.0;
            p[static_cast<size_t>(i) * n + j] = v;
            psum += v;
        }
    for (double& v : p) v = std::max(v / psum, 1e-12);

    // gradient descent on the 2-D map
    Rng rng(cfg.seed, "tsne/init");
    std::vector<double> y(static_cast<size_t>(n) * 2), dy(static_cast<size_t>(n) * 2, 0.0),
        gains(static_cast<size_t>(n) * 2, 1.0), vel(static_cast<size_t>(n) * 2, 0.0);
    for (auto& v : y) v = 1e-4 * rng.normal();

    std::vector<double> q(static_cast<size_t>(n) * n), num(static_cast<size_t>(n) * n);
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        const double exaggeration = iter < cfg.exaggeration_iters ? cfg.early_exaggeration : 1.0;
        double qsum = 0.0;
        for (int i = 0; i < n; ++i) {
            num[static_cast<size_t>(i) * n + i] = 0.0;
            for (int j = i + 1; j < n; ++j) {
                const double dx = y[static_cast<size_t>(i) * 2] - y[static_cast<size_t>(j) * 2];
                const double dyv = y[static_cast<size_t>(i) * 2 + 1] - y[static_cast<size_t>(j) * 2 + 1];
                const double v = 1.0 / (1.0 + dx * dx + dyv * dyv);
                num[static_cast<size_t>(i) * n + j] = v;
                num[static_cast<size_t>(j) * n + i] = v;
                qsum += 2.0 * v;
            }
        }
        qsum = std::max(qsum, 1e-300);

        const double momentum = iter < 250 ? 0.5 : 0.8;
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) {
            double g0 = 0.0, g1 = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const double pij = exaggeration * p[static_cast<size_t>(i) * n + j];
                const double nij = num[static_cast<size_t>(i) * n + j];
                const double qij = std::max(nij / qsum, 1e-12);
                const double mult = (pij - qij) * nij;
                g0 += mult * (y[static_cast<size_t>(i) * 2] - y[static_cast<size_t>(j) * 2]);
                g1 += mult * (y[static_cast<size_t>(i) * 2 + 1] - y[static_cast<size_t>(j) * 2 + 1]);
            }
            dy[static_cast<size_t>(i) * 2] = 4.0 * g0;
            dy[static_cast<size_t>(i) * 2 + 1] = 4.0 * g1;
        }
        for (size_t k = 0; k < y.size(); ++k) {
            gains[k] = (dy[k] > 0) != (vel[k] > 0) ? gains[k] + 0.2 : gains[k] * 0.8;
            gains[k] = std::max(gains[k], 0.01);
            vel[k] = momentum * vel[k] - cfg.learning_rate * gains[k] * dy[k];
            y[k] += vel[k];
        }
        // recenter
        double m0 = 0.0, m1 = 0.0;
        for (int i = 0; i < n; ++i) {
            m0 += y[static_cast<size_t>(i) * 2];
            m1 += y[static_cast<size_t>(i) * 2 + 1];
        }
        m0 /= n;
        m1 /= n;
        for (int i = 0; i < n; ++i) {
            y[static_cast<size_t>(i) * 2] -= m0;
            y[static_cast<size_t>(i) * 2 + 1] -= m1;
        }
    }

    Tensor out({n, 2});
    for (int i = 0; i < n; ++i) {
        out[static_cast<int64_t>(i) * 2] = static_cast<float>(y[static_cast<size_t>(i) * 2]);
        out[static_cast<int64_t>(i) * 2 + 1] = static_cast<float>(y[static_cast<size_t>(i) * 2 + 1]);
    }
    return out;
}

double silhouette_score(const Tensor& points, const std::vector<int>& labels) {
    const int n = points.dim(0);
    const int d = points.dim(1);
    check(static_cast<int>(labels.size()) == n, "silhouette: label count mismatch");
    int k = 0;
    for (int y : labels) k = std::max(k, y + 1);
    std::vector<int> cluster_size(static_cast<size_t>(k), 0);
    for (int y : labels) ++cluster_size[static_cast<size_t>(y)];

    double total = 0.0;
    int counted = 0;
#pragma omp parallel for schedule(static) reduction(+ : total, counted)
    for (int i = 0; i < n; ++i) {
        const int yi = labels[static_cast<size_t>(i)];
        if (cluster_size[static_cast<size_t>(yi)] < 2) continue;
        std::vector<double> mean_dist(static_cast<size_t>(k), 0.0);
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double s = 0.0;
            for (int c = 0; c < d; ++c) {
                const double diff = static_cast<double>(points[static_cast<int64_t>(i) * d + c]) -
                                    points[static_cast<int64_t>(j) * d + c];
                s += diff * diff;
            }
            mean_dist[static_cast<size_t>(labels[static_cast<size_t>(j)])] += std::sqrt(s);
        }
        const double a =
            mean_dist[static_cast<size_t>(yi)] / (cluster_size[static_cast<size_t>(yi)] - 1);
        double b = std::numeric_limits<double>::max();
        for (int c = 0; c < k; ++c) {
            if (c == yi || cluster_size[static_cast<size_t>(c)] == 0) continue;
            b = std::min(b, mean_dist[static_cast<size_t>(c)] / cluster_size[static_cast<size_t>(c)]);
        }
        if (b == std::numeric_limits<double>::max()) continue;
        total += (b - a) / std::max(a, b);
        counted += 1;
    }
    check(counted > 0, "silhouette: no scorable points");
    return total / counted;
}

} // namespace gda::eval

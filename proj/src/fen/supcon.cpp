#include "gda/fen/supcon.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace gda::fen {

void ContrastiveBatch::validate() const {
    const int n2 = z.dim(0);
    check(z.rank() == 2 && n2 > 0, "contrastive batch: z must be (2N, d)");
    check(n2 % 2 == 0, "contrastive batch: size must be even (two views per source)");
    check(static_cast<int>(labels.size()) == n2, "contrastive batch: label count mismatch");
    check(static_cast<int>(view_pair.size()) == n2, "contrastive batch: view_pair size mismatch");
    check(tau > 0.0f, "contrastive batch: tau must be positive");
    const int d = z.dim(1);
    for (int i = 0; i < n2; ++i) {
        const int j = view_pair[static_cast<size_t>(i)];
        check(j >= 0 && j < n2 && j != i && view_pair[static_cast<size_t>(j)] == i,
              "contrastive batch: view_pair is not an involution");
        check(labels[static_cast<size_t>(i)] == labels[static_cast<size_t>(j)],
              "contrastive batch: paired views disagree on label");
        double sq = 0.0;
        const float* row = z.data() + static_cast<int64_t>(i) * d;
        for (int k = 0; k < d; ++k) sq += static_cast<double>(row[k]) * row[k];
        check(std::abs(std::sqrt(sq) - 1.0) <= 1e-5,
              "contrastive batch: embedding row " + std::to_string(i) + " is not unit norm");
    }
}

template <typename Real>
Real supcon_loss_raw(const Real* z, int n2, int d, const int* labels, Real tau,
                     SupConReduction reduction, Real* dz) {
    check(tau > Real(0), "supcon: tau must be positive");
    check(n2 >= 2, "supcon: need at least two samples");
    using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> zm(z, n2, d);

    Mat sim = (zm * zm.transpose()) / tau;

    // Row-wise softmax over A(i) = everything but the diagonal, and the
    // positive-mass matrix M(i,p) = 1/|P(i)|.
    Mat q(n2, n2), m = Mat::Zero(n2, n2);
    Real loss = Real(0);
    for (int i = 0; i < n2; ++i) {
        Real mx = -std::numeric_limits<Real>::infinity();
        for (int a = 0; a < n2; ++a)
            if (a != i) mx = std::max(mx, sim(i, a));
        Real denom = Real(0);
        for (int a = 0; a < n2; ++a) {
            if (a == i) {
                q(i, a) = Real(0);
                continue;
            }
            q(i, a) = std::exp(sim(i, a) - mx);
            denom += q(i, a);
        }
        q.row(i) /= denom;
        const Real log_denom = std::log(denom) + mx;

        int np = 0;
        for (int p = 0; p < n2; ++p)
            if (p != i && labels[p] == labels[i]) ++np;
        check(np > 0, "supcon: class with single sample in batch (P(i) empty for anchor " +
                          std::to_string(i) + ")");
        const Real inv_np = Real(1) / static_cast<Real>(np);
        Real acc = Real(0);
        for (int p = 0; p < n2; ++p) {
            if (p == i || labels[p] != labels[i]) continue;
            m(i, p) = inv_np;
            acc += sim(i, p) - log_denom;
        }
        loss -= inv_np * acc;
    }

    const Real scale = reduction == SupConReduction::mean_over_anchors
                           ? Real(1) / static_cast<Real>(n2)
                           : Real(1);

    if (dz) {
        // dL/dZ = (1/tau) [ (Q - M) Z + (Q - M)^T Z ]
        Mat diff = q - m;
        Eigen::Map<Mat> dzm(dz, n2, d);
        dzm.noalias() = (diff * zm + diff.transpose() * zm) * (scale / tau);
    }
    return loss * scale;
}

template float supcon_loss_raw<float>(const float*, int, int, const int*, float, SupConReduction,
                                      float*);
template double supcon_loss_raw<double>(const double*, int, int, const int*, double,
                                        SupConReduction, double*);

float supcon_loss(const ContrastiveBatch& batch, SupConReduction reduction) {
    batch.validate();
    return supcon_loss_raw<float>(batch.z.data(), batch.z.dim(0), batch.z.dim(1),
                                  batch.labels.data(), batch.tau, reduction, nullptr);
}

float supcon_loss_grad(const ContrastiveBatch& batch, Tensor& dz, SupConReduction reduction) {
    batch.validate();
    dz = Tensor(batch.z.shape());
    return supcon_loss_raw<float>(batch.z.data(), batch.z.dim(0), batch.z.dim(1),
                                  batch.labels.data(), batch.tau, reduction, dz.data());
}

} // namespace gda::fen

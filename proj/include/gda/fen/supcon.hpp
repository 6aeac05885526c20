#pragma once

#include <vector>

#include "gda/core/tensor.hpp"

namespace gda::fen {

// A two-views-per-source minibatch ready for the contrastive loss.
// z holds 2N unit-norm embedding rows; labels[i] is the class of row i;
// view_pair[i] is the row index of the other augmented view of the same
// source sample.
struct ContrastiveBatch {
    Tensor z;                 // (2N, d)
    std::vector<int> labels;  // 2N
    std::vector<int> view_pair;
    float tau = 0.07f;

    void validate() const;
};

enum class SupConReduction { sum, mean_over_anchors };

// Core computation, defined for arbitrary (not necessarily unit-norm)
// embeddings. For each anchor i over the batch I = {0..2N-1}:
//   A(i) = I \ {i};  P(i) = {p in A(i) : label_p == label_i};
//   L_i  = -(1/|P(i)|) sum_{p in P(i)} log( exp(z_i.z_p/tau)
//                                           / sum_{a in A(i)} exp(z_i.z_a/tau) )
// Returns sum_i L_i (or its mean over anchors); optionally writes dL/dz.
// Throws if tau <= 0 or some P(i) is empty.
template <typename Real>
Real supcon_loss_raw(const Real* z, int n2, int d, const int* labels, Real tau,
                     SupConReduction reduction, Real* dz);

// Validated front end used by training: checks batch invariants first.
float supcon_loss(const ContrastiveBatch& batch,
                  SupConReduction reduction = SupConReduction::sum);
float supcon_loss_grad(const ContrastiveBatch& batch, Tensor& dz,
                       SupConReduction reduction = SupConReduction::sum);

} // namespace gda::fen

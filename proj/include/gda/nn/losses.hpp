#pragma once

#include <vector>

#include "gda/core/tensor.hpp"

namespace gda::nn {

// Mean cross entropy over softmax(logits); logits (N, K). Writes dlogits.
float softmax_xent(const Tensor& logits, const std::vector<int>& labels, Tensor& dlogits);

// Row-wise softmax probabilities.
Tensor softmax(const Tensor& logits);

// Mean binary cross entropy with logits against a constant target.
// x is (N, 1) or (N,).
float bce_logits(const Tensor& x, float target, Tensor& dx);

// Hinge GAN discriminator terms: mean(relu(1 - x)) for real,
// mean(relu(1 + x)) for fake.
float hinge_real(const Tensor& x, Tensor& dx);
float hinge_fake(const Tensor& x, Tensor& dx);

// mean(x) and -mean(x) with gradients; Wasserstein / hinge generator pieces.
float mean_value(const Tensor& x, Tensor& dx);
float neg_mean_value(const Tensor& x, Tensor& dx);

// Mean absolute error; DAE reconstruction objective.
float mae_loss(const Tensor& pred, const Tensor& target, Tensor& dpred);

} // namespace gda::nn

#include "gda/nn/losses.hpp"

#include <cmath>

namespace gda::nn {

Tensor softmax(const Tensor& logits) {
    const int n = logits.dim(0), k = logits.dim(1);
    Tensor p(logits.shape());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const float* row = logits.data() + static_cast<int64_t>(i) * k;
        float* out = p.data() + static_cast<int64_t>(i) * k;
        float mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < k; ++j) {
            out[j] = std::exp(row[j] - mx);
            sum += out[j];
        }
        const float inv = static_cast<float>(1.0 / sum);
        for (int j = 0; j < k; ++j) out[j] *= inv;
    }
    return p;
}

float softmax_xent(const Tensor& logits, const std::vector<int>& labels, Tensor& dlogits) {
    const int n = logits.dim(0), k = logits.dim(1);
    check(static_cast<int>(labels.size()) == n, "softmax_xent: label count mismatch");
    Tensor p = softmax(logits);
    dlogits = p;
    double loss = 0.0;
    const float inv_n = 1.0f / static_cast<float>(n);
    for (int i = 0; i < n; ++i) {
        const int y = labels[static_cast<size_t>(i)];
        check(y >= 0 && y < k, "softmax_xent: label out of range");
        const float py = std::max(p[static_cast<int64_t>(i) * k + y], 1e-12f);
        loss -= std::log(py);
        dlogits[static_cast<int64_t>(i) * k + y] -= 1.0f;
    }
    for (int64_t i = 0; i < dlogits.numel(); ++i) dlogits[i] *= inv_n;
    return static_cast<float>(loss / n);
}

float bce_logits(const Tensor& x, float target, Tensor& dx) {
    const int64_t n = x.numel();
    dx = Tensor(x.shape());
    double loss = 0.0;
    const float inv_n = 1.0f / static_cast<float>(n);
    for (int64_t i = 0; i < n; ++i) {
        const float v = x[i];
        // max(v,0) - v*t + log(1+exp(-|v|))
        loss += std::max(v, 0.0f) - v * target + std::log1p(std::exp(-std::abs(v)));
        const float sig = 1.0f / (1.0f + std::exp(-v));
        dx[i] = (sig - target) * inv_n;
    }
    return static_cast<float>(loss / static_cast<double>(n));
}

float hinge_real(const Tensor& x, Tensor& dx) {
    const int64_t n = x.numel();
    dx = Tensor(x.shape());
    double loss = 0.0;
    const float inv_n = 1.0f / static_cast<float>(n);
    for (int64_t i = 0; i < n; ++i) {
        const float m = 1.0f - x[i];
        if (m > 0.0f) {
            loss += m;
            dx[i] = -inv_n;
        }
    }
    return static_cast<float>(loss / static_cast<double>(n));
}

float hinge_fake(const Tensor& x, Tensor& dx) {
    const int64_t n = x.numel();
    dx = Tensor(x.shape());
    double loss = 0.0;
    const float inv_n = 1.0f / static_cast<float>(n);
    for (int64_t i = 0; i < n; ++i) {
        const float m = 1.0f + x[i];
        if (m > 0.0f) {
            loss += m;
            dx[i] = inv_n;
        }
    }
    return static_cast<float>(loss / static_cast<double>(n));
}

float mean_value(const Tensor& x, Tensor& dx) {
    const int64_t n = x.numel();
    dx = Tensor::full(x.shape(), 1.0f / static_cast<float>(n));
    double sum = 0.0;
    for (int64_t i = 0; i < n; ++i) sum += x[i];
    return static_cast<float>(sum / static_cast<double>(n));
}

float neg_mean_value(const Tensor& x, Tensor& dx) {
    const float v = mean_value(x, dx);
    for (int64_t i = 0; i < dx.numel(); ++i) dx[i] = -dx[i];
    return -v;
}

float mae_loss(const Tensor& pred, const Tensor& target, Tensor& dpred) {
    check(pred.same_shape(target), "mae_loss: shape mismatch");
    const int64_t n = pred.numel();
    dpred = Tensor(pred.shape());
    double loss = 0.0;
    const float inv_n = 1.0f / static_cast<float>(n);
    for (int64_t i = 0; i < n; ++i) {
        const float d = pred[i] - target[i];
        loss += std::abs(d);
        dpred[i] = (d > 0.0f ? 1.0f : (d < 0.0f ? -1.0f : 0.0f)) * inv_n;
    }
    return static_cast<float>(loss / static_cast<double>(n));
}

} // namespace gda::nn

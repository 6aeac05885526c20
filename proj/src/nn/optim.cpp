#include "gda/nn/optim.hpp"

#include <cmath>

namespace gda::nn {

Sgd::Sgd(std::vector<ParamRef> params, float lr, float momentum)
    : Optimizer(std::move(params)), momentum_(momentum) {
    lr_ = lr;
    velocity_.reserve(params_.size());
    for (auto& p : params_) velocity_.emplace_back(p.value->shape());
}

void Sgd::step() {
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor& w = *params_[pi].value;
        const Tensor& g = *params_[pi].grad;
        Tensor& v = velocity_[pi];
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < w.numel(); ++i) {
            v[i] = momentum_ * v[i] + g[i];
            w[i] -= lr_ * v[i];
        }
    }
}

Adam::Adam(std::vector<ParamRef> params, float lr, float beta1, float beta2, float eps)
    : Optimizer(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    lr_ = lr;
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto& p : params_) {
        m_.emplace_back(p.value->shape());
        v_.emplace_back(p.value->shape());
    }
}

void Adam::step() {
    ++t_;
    const float bc1 = 1.0f - std::pow(beta1_, static_cast<float>(t_));
    const float bc2 = 1.0f - std::pow(beta2_, static_cast<float>(t_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor& w = *params_[pi].value;
        const Tensor& g = *params_[pi].grad;
        Tensor& m = m_[pi];
        Tensor& v = v_[pi];
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < w.numel(); ++i) {
            m[i] = beta1_ * m[i] + (1.0f - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0f - beta2_) * g[i] * g[i];
            const float mhat = m[i] / bc1;
            const float vhat = v[i] / bc2;
            w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

RmsProp::RmsProp(std::vector<ParamRef> params, float lr, float alpha, float eps)
    : Optimizer(std::move(params)), alpha_(alpha), eps_(eps) {
    lr_ = lr;
    sq_.reserve(params_.size());
    for (auto& p : params_) sq_.emplace_back(p.value->shape());
}

void RmsProp::step() {
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor& w = *params_[pi].value;
        const Tensor& g = *params_[pi].grad;
        Tensor& s = sq_[pi];
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < w.numel(); ++i) {
            s[i] = alpha_ * s[i] + (1.0f - alpha_) * g[i] * g[i];
            w[i] -= lr_ * g[i] / (std::sqrt(s[i]) + eps_);
        }
    }
}

void clip_params(std::vector<ParamRef>& params, float c) {
    for (auto& p : params) {
        if (!p.grad) continue;
        Tensor& w = *p.value;
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < w.numel(); ++i)
            w[i] = w[i] < -c ? -c : (w[i] > c ? c : w[i]);
    }
}

} // namespace gda::nn

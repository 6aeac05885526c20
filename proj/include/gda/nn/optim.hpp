#pragma once

#include <vector>

#include "gda/nn/layers.hpp"

namespace gda::nn {

class Optimizer {
public:
    explicit Optimizer(std::vector<ParamRef> params) {
        for (auto& p : params)
            if (p.grad) params_.push_back(p);
    }
    virtual ~Optimizer() = default;

    virtual void step() = 0;

    void set_lr(float lr) { lr_ = lr; }
    float lr() const { return lr_; }

protected:
    std::vector<ParamRef> params_;
    float lr_ = 1e-3f;
};

class Sgd : public Optimizer {
public:
    Sgd(std::vector<ParamRef> params, float lr, float momentum = 0.0f);
    void step() override;

private:
    float momentum_;
    std::vector<Tensor> velocity_;
};

class Adam : public Optimizer {
public:
    Adam(std::vector<ParamRef> params, float lr, float beta1 = 0.9f, float beta2 = 0.999f,
         float eps = 1e-8f);
    void step() override;

private:
    float beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

class RmsProp : public Optimizer {
public:
    RmsProp(std::vector<ParamRef> params, float lr, float alpha = 0.9f, float eps = 1e-8f);
    void step() override;

private:
    float alpha_, eps_;
    std::vector<Tensor> sq_;
};

// Cosine decay from lr0 to ~0 over total epochs.
inline float cosine_lr(float lr0, int epoch, int total_epochs) {
    if (total_epochs <= 1) return lr0;
    const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs);
    return static_cast<float>(lr0 * 0.5 * (1.0 + std::cos(3.141592653589793 * t)));
}

// WGAN critic constraint.
void clip_params(std::vector<ParamRef>& params, float c);

} // namespace gda::nn

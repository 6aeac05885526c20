#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gda/core/rng.hpp"
#include "gda/core/tensor.hpp"

namespace gda::nn {

// A learnable or persistent tensor owned by a layer. grad == nullptr marks
// non-trained state (BN running stats, spectral-norm power iteration vector).
struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
};

class Layer {
public:
    virtual ~Layer() = default;

    virtual Tensor forward(const Tensor& x, bool train) = 0;
    // Consumes the activations cached by the latest forward(train=true).
    // Parameter gradients accumulate; call zero_grads between steps.
    virtual Tensor backward(const Tensor& dy) = 0;

    virtual void collect(const std::string& prefix, std::vector<ParamRef>& out) {}
    virtual std::string kind() const = 0;
};

class Conv2d : public Layer {
public:
    // weight layout: (out_ch, in_ch*k*k)
    Conv2d(int in_ch, int out_ch, int k, int stride, int pad, bool bias, Rng& rng,
           bool spectral_norm = false);

    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect(const std::string& prefix, std::vector<ParamRef>& out) override;
    std::string kind() const override { return "conv2d"; }

    int in_ch() const { return in_ch_; }
    int out_ch() const { return out_ch_; }

private:
    const Tensor& effective_weight(bool train);

    int in_ch_, out_ch_, k_, stride_, pad_;
    bool has_bias_, sn_;
    Tensor w_, gw_, b_, gb_;
    Tensor sn_u_;       // power-iteration vector, length out_ch
    Tensor w_eff_;      // scratch: w_ / sigma when spectral norm is on
    float sn_sigma_ = 1.0f;

    // caches from forward(train=true)
    Tensor col_;
    std::vector<int> x_shape_;
    int ho_ = 0, wo_ = 0;
};

class Linear : public Layer {
public:
    Linear(int in, int out, bool bias, Rng& rng, bool spectral_norm = false);

    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect(const std::string& prefix, std::vector<ParamRef>& out) override;
    std::string kind() const override { return "linear"; }

private:
    const Tensor& effective_weight(bool train);

    int in_, out_;
    bool has_bias_, sn_;
    Tensor w_, gw_, b_, gb_;
    Tensor sn_u_, w_eff_;
    float sn_sigma_ = 1.0f;
    Tensor x_;
    std::vector<int> x_shape_;
};

class BatchNorm2d : public Layer {
public:
    explicit BatchNorm2d(int ch, float momentum = 0.1f, float eps = 1e-5f);

    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect(const std::string& prefix, std::vector<ParamRef>& out) override;
    std::string kind() const override { return "batchnorm2d"; }

private:
    int ch_;
    float momentum_, eps_;
    Tensor gamma_, ggamma_, beta_, gbeta_;
    Tensor running_mean_, running_var_;
    Tensor xhat_;
    std::vector<float> invstd_;
};

class ReLU : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    std::string kind() const override { return "relu"; }

private:
    std::vector<unsigned char> mask_;
};

class LeakyReLU : public Layer {
public:
    explicit LeakyReLU(float alpha = 0.2f) : alpha_(alpha) {}
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    std::string kind() const override { return "leaky_relu"; }

private:
    float alpha_;
    std::vector<unsigned char> mask_;
};

class Tanh : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    std::string kind() const override { return "tanh"; }

private:
    Tensor y_;
};

class Sigmoid : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    std::string kind() const override { return "sigmoid"; }

private:
    Tensor y_;
};

// Zero-insertion 2x upsample: H -> 2H-1. Followed by a k=4, pad=2 conv this
// realizes a stride-2 transposed convolution, checkerboard structure intact.
class ZeroStuff2x : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    std::string kind() const override { return "zero_stuff_2x"; }

private:
    std::vector<int> x_shape_;
};

class NearestUp2x : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    std::string kind() const override { return "nearest_up_2x"; }

private:
    std::vector<int> x_shape_;
};

class GlobalAvgPool : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    std::string kind() const override { return "global_avg_pool"; }

private:
    std::vector<int> x_shape_;
};

class Flatten : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    std::string kind() const override { return "flatten"; }

private:
    std::vector<int> x_shape_;
};

// (N, D) -> per-sample CHW, e.g. latent projection to 4x4 feature maps.
class Reshape : public Layer {
public:
    Reshape(int c, int h, int w) : c_(c), h_(h), w_(w) {}
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    std::string kind() const override { return "reshape"; }

private:
    int c_, h_, w_;
    std::vector<int> x_shape_;
};

// Row-wise L2 normalization of (N, D); projection-head output goes through
// this before the contrastive loss.
class L2Normalize : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    std::string kind() const override { return "l2_normalize"; }

private:
    Tensor y_;
    std::vector<float> inv_norm_;
};

} // namespace gda::nn

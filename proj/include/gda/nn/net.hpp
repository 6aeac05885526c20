#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gda/core/archive.hpp"
#include "gda/nn/layers.hpp"

namespace gda::nn {

// Sequential layer stack. Layers are identified for serialization by their
// position and kind, so a checkpoint only loads into the builder that
// produced it.
class Net {
public:
    Net() = default;
    Net(Net&&) = default;
    Net& operator=(Net&&) = default;
    Net(const Net&) = delete;
    Net& operator=(const Net&) = delete;

    template <typename L, typename... Args>
    L* add(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L* raw = layer.get();
        layers_.push_back(std::move(layer));
        return raw;
    }

    Tensor forward(const Tensor& x, bool train) {
        Tensor cur = x;
        for (auto& l : layers_) cur = l->forward(cur, train);
        return cur;
    }

    Tensor backward(const Tensor& dy) {
        Tensor cur = dy;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
        return cur;
    }

    std::vector<ParamRef> params(const std::string& prefix = "net") const {
        std::vector<ParamRef> out;
        for (size_t i = 0; i < layers_.size(); ++i)
            layers_[i]->collect(prefix + "." + std::to_string(i) + "." + layers_[i]->kind(), out);
        return out;
    }

    void zero_grads() {
        for (auto& p : params())
            if (p.grad) p.grad->fill(0.0f);
    }

    size_t size() const { return layers_.size(); }
    Layer* layer(size_t i) { return layers_[i].get(); }

    void save_into(TensorArchive& ar, const std::string& prefix) const;
    void load_from(const TensorArchive& ar, const std::string& prefix);
    uint64_t weight_digest() const;
    int64_t param_count() const;

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// out = relu(main(x) + shortcut(x)); empty shortcut means identity.
class ResidualBlock : public Layer {
public:
    ResidualBlock(Net main, Net shortcut) : main_(std::move(main)), shortcut_(std::move(shortcut)) {}

    Tensor forward(const Tensor& x, bool train) override {
        Tensor ym = main_.forward(x, train);
        Tensor ys = shortcut_.size() ? shortcut_.forward(x, train) : x;
        check(ym.same_shape(ys), "residual_block: branch shape mismatch");
        Tensor y(ym.shape());
        if (train) mask_.assign(static_cast<size_t>(y.numel()), 0);
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < y.numel(); ++i) {
            const float s = ym[i] + ys[i];
            const bool pos = s > 0.0f;
            y[i] = pos ? s : 0.0f;
            if (train) mask_[static_cast<size_t>(i)] = pos;
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        Tensor ds(dy.shape());
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < dy.numel(); ++i)
            ds[i] = mask_[static_cast<size_t>(i)] ? dy[i] : 0.0f;
        Tensor dx = main_.backward(ds);
        if (shortcut_.size()) {
            Tensor dsh = shortcut_.backward(ds);
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < dx.numel(); ++i) dx[i] += dsh[i];
        } else {
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < dx.numel(); ++i) dx[i] += ds[i];
        }
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) override {
        for (auto& p : main_.params(prefix + ".main")) out.push_back(p);
        for (auto& p : shortcut_.params(prefix + ".short")) out.push_back(p);
    }

    std::string kind() const override { return "residual_block"; }

private:
    Net main_;
    Net shortcut_;
    std::vector<unsigned char> mask_;
};

} // namespace gda::nn

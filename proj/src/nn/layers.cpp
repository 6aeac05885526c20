#include "gda/nn/layers.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace gda::nn {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using CMatMap = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void he_normal_init(Tensor& w, int fan_in, Rng& rng) {
    const float std = std::sqrt(2.0f / static_cast<float>(fan_in));
    for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0f, std);
}

int conv_out(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }

// cols is (C*k*k) x (N*Ho*Wo), row-major; image n fills columns
// [n*Ho*Wo, (n+1)*Ho*Wo).
void im2col(const Tensor& x, int k, int s, int p, int ho, int wo, Tensor& cols) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t ncols = static_cast<int64_t>(n) * ho * wo;
    const int64_t per_img = static_cast<int64_t>(c) * h * w;
#pragma omp parallel for schedule(static)
    for (int ni = 0; ni < n; ++ni) {
        const float* xi = x.data() + per_img * ni;
        for (int ci = 0; ci < c; ++ci) {
            for (int kh = 0; kh < k; ++kh) {
                for (int kw = 0; kw < k; ++kw) {
                    const int64_t row = (static_cast<int64_t>(ci) * k + kh) * k + kw;
                    float* dst = cols.data() + row * ncols + static_cast<int64_t>(ni) * ho * wo;
                    for (int oh = 0; oh < ho; ++oh) {
                        const int ih = oh * s - p + kh;
                        if (ih < 0 || ih >= h) {
                            for (int ow = 0; ow < wo; ++ow) dst[oh * wo + ow] = 0.0f;
                            continue;
                        }
                        const float* src = xi + (static_cast<int64_t>(ci) * h + ih) * w;
                        for (int ow = 0; ow < wo; ++ow) {
                            const int iw = ow * s - p + kw;
                            dst[oh * wo + ow] = (iw < 0 || iw >= w) ? 0.0f : src[iw];
                        }
                    }
                }
            }
        }
    }
}

void col2im(const Tensor& cols, int k, int s, int p, int ho, int wo, Tensor& dx) {
    const int n = dx.dim(0), c = dx.dim(1), h = dx.dim(2), w = dx.dim(3);
    const int64_t ncols = static_cast<int64_t>(n) * ho * wo;
    const int64_t per_img = static_cast<int64_t>(c) * h * w;
#pragma omp parallel for schedule(static)
    for (int ni = 0; ni < n; ++ni) {
        float* dxi = dx.data() + per_img * ni;
        for (int ci = 0; ci < c; ++ci) {
            for (int kh = 0; kh < k; ++kh) {
                for (int kw = 0; kw < k; ++kw) {
                    const int64_t row = (static_cast<int64_t>(ci) * k + kh) * k + kw;
                    const float* src = cols.data() + row * ncols + static_cast<int64_t>(ni) * ho * wo;
                    for (int oh = 0; oh < ho; ++oh) {
                        const int ih = oh * s - p + kh;
                        if (ih < 0 || ih >= h) continue;
                        float* dst = dxi + (static_cast<int64_t>(ci) * h + ih) * w;
                        for (int ow = 0; ow < wo; ++ow) {
                            const int iw = ow * s - p + kw;
                            if (iw >= 0 && iw < w) dst[iw] += src[oh * wo + ow];
                        }
                    }
                }
            }
        }
    }
}

// One power iteration on W (rows x cols) using persistent u; returns sigma.
float spectral_sigma(const Tensor& w, Tensor& u, bool update_u) {
    const int rows = w.dim(0), cols = w.dim(1);
    CMatMap wm(w.data(), rows, cols);
    Eigen::Map<Eigen::VectorXf> um(u.data(), rows);
    Eigen::VectorXf v = wm.transpose() * um;
    const float vn = v.norm();
    if (vn > 1e-12f) v /= vn;
    Eigen::VectorXf wu = wm * v;
    const float sigma = wu.norm();
    if (update_u && sigma > 1e-12f) {
        wu /= sigma;
        um = wu;
    }
    return sigma > 1e-12f ? sigma : 1.0f;
}

} // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_ch, int out_ch, int k, int stride, int pad, bool bias, Rng& rng,
               bool spectral_norm)
    : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad), has_bias_(bias),
      sn_(spectral_norm) {
    w_ = Tensor({out_ch, in_ch * k * k});
    gw_ = Tensor({out_ch, in_ch * k * k});
    he_normal_init(w_, in_ch * k * k, rng);
    if (has_bias_) {
        b_ = Tensor({out_ch});
        gb_ = Tensor({out_ch});
    }
    if (sn_) {
        sn_u_ = Tensor({out_ch});
        for (int64_t i = 0; i < sn_u_.numel(); ++i) sn_u_[i] = rng.normal();
        Eigen::Map<Eigen::VectorXf> um(sn_u_.data(), out_ch);
        um.normalize();
    }
}

const Tensor& Conv2d::effective_weight(bool train) {
    if (!sn_) return w_;
    sn_sigma_ = spectral_sigma(w_, sn_u_, train);
    w_eff_ = w_;
    const float inv = 1.0f / sn_sigma_;
    for (int64_t i = 0; i < w_eff_.numel(); ++i) w_eff_[i] *= inv;
    return w_eff_;
}

Tensor Conv2d::forward(const Tensor& x, bool train) {
    check(x.rank() == 4 && x.dim(1) == in_ch_, "conv2d: bad input shape");
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    ho_ = conv_out(h, k_, stride_, pad_);
    wo_ = conv_out(w, k_, stride_, pad_);
    check(ho_ > 0 && wo_ > 0, "conv2d: output would be empty");
    const int kk = in_ch_ * k_ * k_;
    const int64_t ncols = static_cast<int64_t>(n) * ho_ * wo_;

    Tensor cols({kk, static_cast<int>(ncols)});
    im2col(x, k_, stride_, pad_, ho_, wo_, cols);

    const Tensor& weff = effective_weight(train);
    Tensor ymat({out_ch_, static_cast<int>(ncols)});
    {
        CMatMap wm(weff.data(), out_ch_, kk);
        CMatMap cm(cols.data(), kk, ncols);
        MatMap ym(ymat.data(), out_ch_, ncols);
        ym.noalias() = wm * cm;
    }

    Tensor y({n, out_ch_, ho_, wo_});
    const int64_t hw = static_cast<int64_t>(ho_) * wo_;
#pragma omp parallel for schedule(static)
    for (int ni = 0; ni < n; ++ni) {
        for (int oc = 0; oc < out_ch_; ++oc) {
            const float* src = ymat.data() + oc * ncols + ni * hw;
            float* dst = y.data() + (static_cast<int64_t>(ni) * out_ch_ + oc) * hw;
            const float bias = has_bias_ ? b_[oc] : 0.0f;
            for (int64_t i = 0; i < hw; ++i) dst[i] = src[i] + bias;
        }
    }

    if (train) {
        col_ = std::move(cols);
        x_shape_ = x.shape();
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
    check(!x_shape_.empty(), "conv2d: backward without cached forward");
    const int n = x_shape_[0];
    const int kk = in_ch_ * k_ * k_;
    const int64_t hw = static_cast<int64_t>(ho_) * wo_;
    const int64_t ncols = static_cast<int64_t>(n) * hw;

    // gather dy into (out_ch x ncols)
    Tensor dymat({out_ch_, static_cast<int>(ncols)});
#pragma omp parallel for schedule(static)
    for (int ni = 0; ni < n; ++ni) {
        for (int oc = 0; oc < out_ch_; ++oc) {
            const float* src = dy.data() + (static_cast<int64_t>(ni) * out_ch_ + oc) * hw;
            float* dst = dymat.data() + oc * ncols + ni * hw;
            std::copy(src, src + hw, dst);
        }
    }

    {
        CMatMap dym(dymat.data(), out_ch_, ncols);
        CMatMap cm(col_.data(), kk, ncols);
        MatMap gwm(gw_.data(), out_ch_, kk);
        const float scale = sn_ ? 1.0f / sn_sigma_ : 1.0f;
        gwm.noalias() += scale * (dym * cm.transpose());
        if (has_bias_) {
            Eigen::Map<Eigen::VectorXf> gbm(gb_.data(), out_ch_);
            gbm.noalias() += dym.rowwise().sum();
        }
    }

    Tensor dcols({kk, static_cast<int>(ncols)});
    {
        const Tensor& weff = sn_ ? w_eff_ : w_;
        CMatMap wm(weff.data(), out_ch_, kk);
        CMatMap dym(dymat.data(), out_ch_, ncols);
        MatMap dcm(dcols.data(), kk, ncols);
        dcm.noalias() = wm.transpose() * dym;
    }

    Tensor dx(x_shape_);
    col2im(dcols, k_, stride_, pad_, ho_, wo_, dx);
    return dx;
}

void Conv2d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".w", &w_, &gw_});
    if (has_bias_) out.push_back({prefix + ".b", &b_, &gb_});
    if (sn_) out.push_back({prefix + ".sn_u", &sn_u_, nullptr});
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in, int out, bool bias, Rng& rng, bool spectral_norm)
    : in_(in), out_(out), has_bias_(bias), sn_(spectral_norm) {
    w_ = Tensor({out, in});
    gw_ = Tensor({out, in});
    he_normal_init(w_, in, rng);
    if (has_bias_) {
        b_ = Tensor({out});
        gb_ = Tensor({out});
    }
    if (sn_) {
        sn_u_ = Tensor({out});
        for (int64_t i = 0; i < sn_u_.numel(); ++i) sn_u_[i] = rng.normal();
        Eigen::Map<Eigen::VectorXf> um(sn_u_.data(), out);
        um.normalize();
    }
}

const Tensor& Linear::effective_weight(bool train) {
    if (!sn_) return w_;
    sn_sigma_ = spectral_sigma(w_, sn_u_, train);
    w_eff_ = w_;
    const float inv = 1.0f / sn_sigma_;
    for (int64_t i = 0; i < w_eff_.numel(); ++i) w_eff_[i] *= inv;
    return w_eff_;
}

Tensor Linear::forward(const Tensor& x, bool train) {
    const int n = x.dim(0);
    const int64_t per = x.numel() / n;
    check(per == in_, "linear: input feature size mismatch");

    const Tensor& weff = effective_weight(train);
    Tensor y({n, out_});
    {
        CMatMap xm(x.data(), n, in_);
        CMatMap wm(weff.data(), out_, in_);
        MatMap ym(y.data(), n, out_);
        ym.noalias() = xm * wm.transpose();
        if (has_bias_) {
            Eigen::Map<const Eigen::VectorXf> bm(b_.data(), out_);
            ym.rowwise() += bm.transpose();
        }
    }
    if (train) {
        x_ = x;
        x_shape_ = x.shape();
    }
    return y;
}

Tensor Linear::backward(const Tensor& dy) {
    check(!x_shape_.empty(), "linear: backward without cached forward");
    const int n = dy.dim(0);
    CMatMap dym(dy.data(), n, out_);
    CMatMap xm(x_.data(), n, in_);
    {
        MatMap gwm(gw_.data(), out_, in_);
        const float scale = sn_ ? 1.0f / sn_sigma_ : 1.0f;
        gwm.noalias() += scale * (dym.transpose() * xm);
        if (has_bias_) {
            Eigen::Map<Eigen::VectorXf> gbm(gb_.data(), out_);
            gbm.noalias() += dym.colwise().sum().transpose();
        }
    }
    Tensor dx(x_shape_);
    {
        const Tensor& weff = sn_ ? w_eff_ : w_;
        CMatMap wm(weff.data(), out_, in_);
        MatMap dxm(dx.data(), n, in_);
        dxm.noalias() = dym * wm;
    }
    return dx;
}

void Linear::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".w", &w_, &gw_});
    if (has_bias_) out.push_back({prefix + ".b", &b_, &gb_});
    if (sn_) out.push_back({prefix + ".sn_u", &sn_u_, nullptr});
}

// ---------------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(int ch, float momentum, float eps)
    : ch_(ch), momentum_(momentum), eps_(eps) {
    gamma_ = Tensor::full({ch}, 1.0f);
    ggamma_ = Tensor({ch});
    beta_ = Tensor({ch});
    gbeta_ = Tensor({ch});
    running_mean_ = Tensor({ch});
    running_var_ = Tensor::full({ch}, 1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
    check(x.rank() == 4 && x.dim(1) == ch_, "batchnorm2d: bad input shape");
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int64_t hw = static_cast<int64_t>(h) * w;
    const int64_t m = static_cast<int64_t>(n) * hw;

    Tensor y(x.shape());
    if (train) {
        xhat_ = Tensor(x.shape());
        invstd_.assign(static_cast<size_t>(ch_), 0.0f);
#pragma omp parallel for schedule(static)
        for (int c = 0; c < ch_; ++c) {
            double sum = 0.0, sq = 0.0;
            for (int ni = 0; ni < n; ++ni) {
                const float* src = x.data() + (static_cast<int64_t>(ni) * ch_ + c) * hw;
                for (int64_t i = 0; i < hw; ++i) {
                    sum += src[i];
                    sq += static_cast<double>(src[i]) * src[i];
                }
            }
            const float mean = static_cast<float>(sum / static_cast<double>(m));
            const float var =
                static_cast<float>(sq / static_cast<double>(m) - static_cast<double>(mean) * mean);
            const float istd = 1.0f / std::sqrt(std::max(var, 0.0f) + eps_);
            invstd_[static_cast<size_t>(c)] = istd;
            running_mean_[c] = (1.0f - momentum_) * running_mean_[c] + momentum_ * mean;
            running_var_[c] = (1.0f - momentum_) * running_var_[c] + momentum_ * std::max(var, 0.0f);
            const float g = gamma_[c], bt = beta_[c];
            for (int ni = 0; ni < n; ++ni) {
                const float* src = x.data() + (static_cast<int64_t>(ni) * ch_ + c) * hw;
                float* xh = xhat_.data() + (static_cast<int64_t>(ni) * ch_ + c) * hw;
                float* dst = y.data() + (static_cast<int64_t>(ni) * ch_ + c) * hw;
                for (int64_t i = 0; i < hw; ++i) {
                    xh[i] = (src[i] - mean) * istd;
                    dst[i] = g * xh[i] + bt;
                }
            }
        }
    } else {
#pragma omp parallel for schedule(static)
        for (int c = 0; c < ch_; ++c) {
            const float istd = 1.0f / std::sqrt(running_var_[c] + eps_);
            const float mean = running_mean_[c];
            const float g = gamma_[c], bt = beta_[c];
            for (int ni = 0; ni < n; ++ni) {
                const float* src = x.data() + (static_cast<int64_t>(ni) * ch_ + c) * hw;
                float* dst = y.data() + (static_cast<int64_t>(ni) * ch_ + c) * hw;
                for (int64_t i = 0; i < hw; ++i) dst[i] = g * (src[i] - mean) * istd + bt;
            }
        }
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
    check(xhat_.numel() > 0, "batchnorm2d: backward without cached train forward");
    const int n = dy.dim(0), h = dy.dim(2), w = dy.dim(3);
    const int64_t hw = static_cast<int64_t>(h) * w;
    const int64_t m = static_cast<int64_t>(n) * hw;

    Tensor dx(dy.shape());
#pragma omp parallel for schedule(static)
    for (int c = 0; c < ch_; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int ni = 0; ni < n; ++ni) {
            const float* dsrc = dy.data() + (static_cast<int64_t>(ni) * ch_ + c) * hw;
            const float* xh = xhat_.data() + (static_cast<int64_t>(ni) * ch_ + c) * hw;
            for (int64_t i = 0; i < hw; ++i) {
                sum_dy += dsrc[i];
                sum_dy_xhat += static_cast<double>(dsrc[i]) * xh[i];
            }
        }
        ggamma_[c] += static_cast<float>(sum_dy_xhat);
        gbeta_[c] += static_cast<float>(sum_dy);
        const float g = gamma_[c];
        const float istd = invstd_[static_cast<size_t>(c)];
        const float mean_dy = static_cast<float>(sum_dy / static_cast<double>(m));
        const float mean_dy_xhat = static_cast<float>(sum_dy_xhat / static_cast<double>(m));
        for (int ni = 0; ni < n; ++ni) {
            const float* dsrc = dy.data() + (static_cast<int64_t>(ni) * ch_ + c) * hw;
            const float* xh = xhat_.data() + (static_cast<int64_t>(ni) * ch_ + c) * hw;
            float* dst = dx.data() + (static_cast<int64_t>(ni) * ch_ + c) * hw;
            for (int64_t i = 0; i < hw; ++i)
                dst[i] = g * istd * (dsrc[i] - mean_dy - xh[i] * mean_dy_xhat);
        }
    }
    return dx;
}

void BatchNorm2d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".gamma", &gamma_, &ggamma_});
    out.push_back({prefix + ".beta", &beta_, &gbeta_});
    out.push_back({prefix + ".running_mean", &running_mean_, nullptr});
    out.push_back({prefix + ".running_var", &running_var_, nullptr});
}

// ---------------------------------------------------------------- activations

Tensor ReLU::forward(const Tensor& x, bool train) {
    Tensor y(x.shape());
    if (train) mask_.assign(static_cast<size_t>(x.numel()), 0);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < x.numel(); ++i) {
        const bool pos = x[i] > 0.0f;
        y[i] = pos ? x[i] : 0.0f;
        if (train) mask_[static_cast<size_t>(i)] = pos;
    }
    return y;
}

Tensor ReLU::backward(const Tensor& dy) {
    Tensor dx(dy.shape());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < dy.numel(); ++i)
        dx[i] = mask_[static_cast<size_t>(i)] ? dy[i] : 0.0f;
    return dx;
}

Tensor LeakyReLU::forward(const Tensor& x, bool train) {
    Tensor y(x.shape());
    if (train) mask_.assign(static_cast<size_t>(x.numel()), 0);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < x.numel(); ++i) {
        const bool pos = x[i] > 0.0f;
        y[i] = pos ? x[i] : alpha_ * x[i];
        if (train) mask_[static_cast<size_t>(i)] = pos;
    }
    return y;
}

Tensor LeakyReLU::backward(const Tensor& dy) {
    Tensor dx(dy.shape());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < dy.numel(); ++i)
        dx[i] = mask_[static_cast<size_t>(i)] ? dy[i] : alpha_ * dy[i];
    return dx;
}

Tensor Tanh::forward(const Tensor& x, bool train) {
    Tensor y(x.shape());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < x.numel(); ++i) y[i] = std::tanh(x[i]);
    if (train) y_ = y;
    return y;
}

Tensor Tanh::backward(const Tensor& dy) {
    Tensor dx(dy.shape());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < dy.numel(); ++i) dx[i] = dy[i] * (1.0f - y_[i] * y_[i]);
    return dx;
}

Tensor Sigmoid::forward(const Tensor& x, bool train) {
    Tensor y(x.shape());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < x.numel(); ++i) y[i] = 1.0f / (1.0f + std::exp(-x[i]));
    if (train) y_ = y;
    return y;
}

Tensor Sigmoid::backward(const Tensor& dy) {
    Tensor dx(dy.shape());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < dy.numel(); ++i) dx[i] = dy[i] * y_[i] * (1.0f - y_[i]);
    return dx;
}

// ---------------------------------------------------------------- resampling

Tensor ZeroStuff2x::forward(const Tensor& x, bool train) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor y({n, c, 2 * h - 1, 2 * w - 1});
#pragma omp parallel for schedule(static)
    for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < c; ++ci) {
            const float* src = x.data() + (static_cast<int64_t>(ni) * c + ci) * h * w;
            float* dst = y.data() + (static_cast<int64_t>(ni) * c + ci) * (2 * h - 1) * (2 * w - 1);
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                    dst[(2 * i) * (2 * w - 1) + 2 * j] = src[i * w + j];
        }
    }
    if (train) x_shape_ = x.shape();
    return y;
}

Tensor ZeroStuff2x::backward(const Tensor& dy) {
    const int n = x_shape_[0], c = x_shape_[1], h = x_shape_[2], w = x_shape_[3];
    Tensor dx(x_shape_);
#pragma omp parallel for schedule(static)
    for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < c; ++ci) {
            const float* src = dy.data() + (static_cast<int64_t>(ni) * c + ci) * (2 * h - 1) * (2 * w - 1);
            float* dst = dx.data() + (static_cast<int64_t>(ni) * c + ci) * h * w;
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                    dst[i * w + j] = src[(2 * i) * (2 * w - 1) + 2 * j];
        }
    }
    return dx;
}

Tensor NearestUp2x::forward(const Tensor& x, bool train) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor y({n, c, 2 * h, 2 * w});
#pragma omp parallel for schedule(static)
    for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < c; ++ci) {
            const float* src = x.data() + (static_cast<int64_t>(ni) * c + ci) * h * w;
            float* dst = y.data() + (static_cast<int64_t>(ni) * c + ci) * 4 * h * w;
            for (int i = 0; i < 2 * h; ++i)
                for (int j = 0; j < 2 * w; ++j)
                    dst[i * 2 * w + j] = src[(i / 2) * w + j / 2];
        }
    }
    if (train) x_shape_ = x.shape();
    return y;
}

Tensor NearestUp2x::backward(const Tensor& dy) {
    const int n = x_shape_[0], c = x_shape_[1], h = x_shape_[2], w = x_shape_[3];
    Tensor dx(x_shape_);
#pragma omp parallel for schedule(static)
    for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < c; ++ci) {
            const float* src = dy.data() + (static_cast<int64_t>(ni) * c + ci) * 4 * h * w;
            float* dst = dx.data() + (static_cast<int64_t>(ni) * c + ci) * h * w;
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                    dst[i * w + j] = src[(2 * i) * 2 * w + 2 * j] + src[(2 * i) * 2 * w + 2 * j + 1] +
                                     src[(2 * i + 1) * 2 * w + 2 * j] +
                                     src[(2 * i + 1) * 2 * w + 2 * j + 1];
        }
    }
    return dx;
}

// ---------------------------------------------------------------- shape ops

Tensor GlobalAvgPool::forward(const Tensor& x, bool train) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t hw = static_cast<int64_t>(h) * w;
    Tensor y({n, c});
#pragma omp parallel for schedule(static)
    for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < c; ++ci) {
            const float* src = x.data() + (static_cast<int64_t>(ni) * c + ci) * hw;
            double sum = 0.0;
            for (int64_t i = 0; i < hw; ++i) sum += src[i];
            y[static_cast<int64_t>(ni) * c + ci] = static_cast<float>(sum / static_cast<double>(hw));
        }
    }
    if (train) x_shape_ = x.shape();
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
    const int n = x_shape_[0], c = x_shape_[1], h = x_shape_[2], w = x_shape_[3];
    const int64_t hw = static_cast<int64_t>(h) * w;
    const float inv = 1.0f / static_cast<float>(hw);
    Tensor dx(x_shape_);
#pragma omp parallel for schedule(static)
    for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < c; ++ci) {
            const float g = dy[static_cast<int64_t>(ni) * c + ci] * inv;
            float* dst = dx.data() + (static_cast<int64_t>(ni) * c + ci) * hw;
            for (int64_t i = 0; i < hw; ++i) dst[i] = g;
        }
    }
    return dx;
}

Tensor Flatten::forward(const Tensor& x, bool train) {
    if (train) x_shape_ = x.shape();
    const int n = x.dim(0);
    return x.reshaped({n, static_cast<int>(x.numel() / n)});
}

Tensor Flatten::backward(const Tensor& dy) { return dy.reshaped(x_shape_); }

Tensor Reshape::forward(const Tensor& x, bool train) {
    if (train) x_shape_ = x.shape();
    const int n = x.dim(0);
    check(x.numel() / n == static_cast<int64_t>(c_) * h_ * w_, "reshape: element count mismatch");
    return x.reshaped({n, c_, h_, w_});
}

Tensor Reshape::backward(const Tensor& dy) { return dy.reshaped(x_shape_); }

Tensor L2Normalize::forward(const Tensor& x, bool train) {
    const int n = x.dim(0), d = x.dim(1);
    Tensor y(x.shape());
    std::vector<float> inv(static_cast<size_t>(n));
#pragma omp parallel for schedule(static)
    for (int ni = 0; ni < n; ++ni) {
        const float* src = x.data() + static_cast<int64_t>(ni) * d;
        double sq = 0.0;
        for (int i = 0; i < d; ++i) sq += static_cast<double>(src[i]) * src[i];
        const float in = 1.0f / std::max(static_cast<float>(std::sqrt(sq)), 1e-12f);
        inv[static_cast<size_t>(ni)] = in;
        float* dst = y.data() + static_cast<int64_t>(ni) * d;
        for (int i = 0; i < d; ++i) dst[i] = src[i] * in;
    }
    if (train) {
        y_ = y;
        inv_norm_ = std::move(inv);
    }
    return y;
}

Tensor L2Normalize::backward(const Tensor& dy) {
    const int n = dy.dim(0), d = dy.dim(1);
    Tensor dx(dy.shape());
#pragma omp parallel for schedule(static)
    for (int ni = 0; ni < n; ++ni) {
        const float* g = dy.data() + static_cast<int64_t>(ni) * d;
        const float* yv = y_.data() + static_cast<int64_t>(ni) * d;
        double dot = 0.0;
        for (int i = 0; i < d; ++i) dot += static_cast<double>(g[i]) * yv[i];
        float* dst = dx.data() + static_cast<int64_t>(ni) * d;
        const float in = inv_norm_[static_cast<size_t>(ni)];
        for (int i = 0; i < d; ++i)
            dst[i] = in * (g[i] - static_cast<float>(dot) * yv[i]);
    }
    return dx;
}

} // namespace gda::nn

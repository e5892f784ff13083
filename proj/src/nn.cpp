// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#include "vqtlight/nn.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace vqtl::nn {

bool Tensor::all_finite() const {
    for (float x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float *a,
          const float *b, float beta, float *c) {
    const int lda = trans_a ? m : k;
    const int ldb = trans_b ? k : n;
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta,
                c, n);
}

int conv_out_extent(int extent, int k, int stride, int pad) {
    return (extent + 2 * pad - k) / stride + 1;
}

void im2col(const float *src, int c, int h, int w, int k, int stride, int pad, float *col) {
    const int oh = conv_out_extent(h, k, stride, pad);
    const int ow = conv_out_extent(w, k, stride, pad);
    const int spatial = oh * ow;
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                float *row = col + ((static_cast<size_t>(ci) * k + ky) * k + kx) * spatial;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) {
                        std::memset(row + static_cast<size_t>(oy) * ow, 0,
                                    sizeof(float) * ow);
                        continue;
                    }
                    const float *src_row = src + (static_cast<size_t>(ci) * h + iy) * w;
                    float *dst_row = row + static_cast<size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        dst_row[ox] = (ix >= 0 && ix < w) ? src_row[ix] : 0.0f;
                    }
                }
            }
        }
    }
}

void col2im(const float *col, int c, int h, int w, int k, int stride, int pad, float *dst) {
    const int oh = conv_out_extent(h, k, stride, pad);
    const int ow = conv_out_extent(w, k, stride, pad);
    const int spatial = oh * ow;
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const float *row =
                    col + ((static_cast<size_t>(ci) * k + ky) * k + kx) * spatial;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    float *dst_row = dst + (static_cast<size_t>(ci) * h + iy) * w;
                    const float *src_row = row + static_cast<size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) dst_row[ix] += src_row[ox];
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(std::string name, int in_c_, int out_c_, int k_, int stride_, int pad_)
    : in_c(in_c_), out_c(out_c_), k(k_), stride(stride_), pad(pad_) {
    weight.init_shape(name + ".weight", {out_c, in_c * k * k});
    bias.init_shape(name + ".bias", {out_c});
}

void Conv2d::init(Rng &rng, double weight_scale) {
    const double std_dev =
        weight_scale > 0 ? weight_scale : std::sqrt(2.0 / (in_c * k * k));
    for (auto &x : weight.w.v) x = static_cast<float>(rng.normal() * std_dev);
    bias.w.zero();
}

void Conv2d::forward(const float *x, int h, int w, Tensor *y) {
    h_ = h;
    w_ = w;
    oh_ = conv_out_extent(h, k, stride, pad);
    ow_ = conv_out_extent(w, k, stride, pad);
    const int spatial = oh_ * ow_;
    const int ckk = in_c * k * k;
    col_.resize(static_cast<size_t>(ckk) * spatial);
    im2col(x, in_c, h, w, k, stride, pad, col_.data());
    *y = Tensor({out_c, oh_, ow_});
    gemm(false, false, out_c, spatial, ckk, 1.0f, weight.w.data(), col_.data(), 0.0f,
         y->data());
    for (int co = 0; co < out_c; ++co) {
        float *plane = y->data() + static_cast<size_t>(co) * spatial;
        const float b = bias.w.v[co];
        for (int i = 0; i < spatial; ++i) plane[i] += b;
    }
}

void Conv2d::backward(const float *dy, float *dx) {
    const int spatial = oh_ * ow_;
    const int ckk = in_c * k * k;
    // dW += dy * col^T, db += row sums of dy.
    gemm(false, true, out_c, ckk, spatial, 1.0f, dy, col_.data(), 1.0f, weight.g.data());
    for (int co = 0; co < out_c; ++co) {
        const float *plane = dy + static_cast<size_t>(co) * spatial;
        double acc = 0;
        for (int i = 0; i < spatial; ++i) acc += plane[i];
        bias.g.v[co] += static_cast<float>(acc);
    }
    if (dx == nullptr) return;
    // col_ is consumed above; reuse it for W^T * dy before scattering.
    gemm(true, false, ckk, spatial, out_c, 1.0f, weight.w.data(), dy, 0.0f, col_.data());
    std::memset(dx, 0, sizeof(float) * static_cast<size_t>(in_c) * h_ * w_);
    col2im(col_.data(), in_c, h_, w_, k, stride, pad, dx);
}

// ---------------------------------------------------------------------------
// ConvTranspose2d
// ---------------------------------------------------------------------------

ConvTranspose2d::ConvTranspose2d(std::string name, int in_c_, int out_c_, int k_,
                                 int stride_, int pad_)
    : in_c(in_c_), out_c(out_c_), k(k_), stride(stride_), pad(pad_) {
    weight.init_shape(name + ".weight", {in_c, out_c * k * k});
    bias.init_shape(name + ".bias", {out_c});
}

void ConvTranspose2d::init(Rng &rng, double weight_scale) {
    const double std_dev =
        weight_scale > 0 ? weight_scale : std::sqrt(2.0 / (in_c * k * k));
    for (auto &x : weight.w.v) x = static_cast<float>(rng.normal() * std_dev);
    bias.w.zero();
}

void ConvTranspose2d::forward(const float *x, int h, int w, Tensor *y) {
    h_ = h;
    w_ = w;
    oh_ = (h - 1) * stride - 2 * pad + k;
    ow_ = (w - 1) * stride - 2 * pad + k;
    const int ckk = out_c * k * k;
    const int spatial = h * w;
    x_cache_.assign(x, x + static_cast<size_t>(in_c) * spatial);
    col_.resize(static_cast<size_t>(ckk) * spatial);
    // col = W^T * x, then scatter-add into the upsampled grid.
    gemm(true, false, ckk, spatial, in_c, 1.0f, weight.w.data(), x, 0.0f, col_.data());
    *y = Tensor({out_c, oh_, ow_});
    col2im(col_.data(), out_c, oh_, ow_, k, stride, pad, y->data());
    const int out_spatial = oh_ * ow_;
    for (int co = 0; co < out_c; ++co) {
        float *plane = y->data() + static_cast<size_t>(co) * out_spatial;
        const float b = bias.w.v[co];
        for (int i = 0; i < out_spatial; ++i) plane[i] += b;
    }
}

void ConvTranspose2d::backward(const float *dy, float *dx) {
    const int ckk = out_c * k * k;
    const int spatial = h_ * w_;
    const int out_spatial = oh_ * ow_;
    // Gathering dy back to column form inverts the forward scatter.
    im2col(dy, out_c, oh_, ow_, k, stride, pad, col_.data());
    gemm(false, true, in_c, ckk, spatial, 1.0f, x_cache_.data(), col_.data(), 1.0f,
         weight.g.data());
    for (int co = 0; co < out_c; ++co) {
        const float *plane = dy + static_cast<size_t>(co) * out_spatial;
        double acc = 0;
        for (int i = 0; i < out_spatial; ++i) acc += plane[i];
        bias.g.v[co] += static_cast<float>(acc);
    }
    if (dx == nullptr) return;
    gemm(false, false, in_c, spatial, ckk, 1.0f, weight.w.data(), col_.data(), 0.0f, dx);
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

Linear::Linear(std::string name, int in_dim_, int out_dim_)
    : in_dim(in_dim_), out_dim(out_dim_) {
    weight.init_shape(name + ".weight", {out_dim, in_dim});
    bias.init_shape(name + ".bias", {out_dim});
}

void Linear::init(Rng &rng, double weight_scale) {
    const double std_dev = weight_scale > 0 ? weight_scale : std::sqrt(2.0 / in_dim);
    for (auto &x : weight.w.v) x = static_cast<float>(rng.normal() * std_dev);
    bias.w.zero();
}

void Linear::forward(const float *x, int n, Tensor *y) {
    n_ = n;
    x_cache_.assign(x, x + static_cast<size_t>(n) * in_dim);
    *y = Tensor({n, out_dim});
    gemm(false, true, n, out_dim, in_dim, 1.0f, x, weight.w.data(), 0.0f, y->data());
    for (int i = 0; i < n; ++i) {
        float *row = y->data() + static_cast<size_t>(i) * out_dim;
        for (int j = 0; j < out_dim; ++j) row[j] += bias.w.v[j];
    }
}

void Linear::backward(const float *dy, float *dx) {
    gemm(true, false, out_dim, in_dim, n_, 1.0f, dy, x_cache_.data(), 1.0f,
         weight.g.data());
    for (int i = 0; i < n_; ++i) {
        const float *row = dy + static_cast<size_t>(i) * out_dim;
        for (int j = 0; j < out_dim; ++j) bias.g.v[j] += row[j];
    }
    if (dx == nullptr) return;
    gemm(false, false, n_, in_dim, out_dim, 1.0f, dy, weight.w.data(), 0.0f, dx);
}

// ---------------------------------------------------------------------------
// LayerNorm
// ---------------------------------------------------------------------------

LayerNorm::LayerNorm(std::string name, int dim_) : dim(dim_) {
    gamma.init_shape(name + ".gamma", {dim});
    beta.init_shape(name + ".beta", {dim});
}

void LayerNorm::init() {
    std::fill(gamma.w.v.begin(), gamma.w.v.end(), 1.0f);
    beta.w.zero();
}

void LayerNorm::forward(const float *x, int n, Tensor *y) {
    n_ = n;
    xhat_.resize(static_cast<size_t>(n) * dim);
    inv_std_.resize(n);
    *y = Tensor({n, dim});
    for (int i = 0; i < n; ++i) {
        const float *row = x + static_cast<size_t>(i) * dim;
        double mean = 0;
        for (int j = 0; j < dim; ++j) mean += row[j];
        mean /= dim;
        double var = 0;
        for (int j = 0; j < dim; ++j) {
            const double d = row[j] - mean;
            var += d * d;
        }
        var /= dim;
        const float is = static_cast<float>(1.0 / std::sqrt(var + kEps));
        inv_std_[i] = is;
        float *xh = xhat_.data() + static_cast<size_t>(i) * dim;
        float *out = y->data() + static_cast<size_t>(i) * dim;
        for (int j = 0; j < dim; ++j) {
            xh[j] = static_cast<float>((row[j] - mean) * is);
            out[j] = xh[j] * gamma.w.v[j] + beta.w.v[j];
        }
    }
}

void LayerNorm::backward(const float *dy, float *dx) {
    for (int i = 0; i < n_; ++i) {
        const float *dyr = dy + static_cast<size_t>(i) * dim;
        const float *xh = xhat_.data() + static_cast<size_t>(i) * dim;
        double sum_dxhat = 0, sum_dxhat_xhat = 0;
        for (int j = 0; j < dim; ++j) {
            const double dxh = static_cast<double>(dyr[j]) * gamma.w.v[j];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xh[j];
            gamma.g.v[j] += dyr[j] * xh[j];
            beta.g.v[j] += dyr[j];
        }
        if (dx == nullptr) continue;
        const double mean_dxhat = sum_dxhat / dim;
        const double mean_dxhat_xhat = sum_dxhat_xhat / dim;
        float *dxr = dx + static_cast<size_t>(i) * dim;
        for (int j = 0; j < dim; ++j) {
            const double dxh = static_cast<double>(dyr[j]) * gamma.w.v[j];
            dxr[j] = static_cast<float>(inv_std_[i] *
                                        (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat));
        }
    }
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

void ReLU::forward(float *x, size_t n) {
    mask_.resize(n);
    for (size_t i = 0; i < n; ++i) {
        mask_[i] = x[i] > 0.0f;
        if (!mask_[i]) x[i] = 0.0f;
    }
}

void ReLU::backward(float *dy) const {
    for (size_t i = 0; i < mask_.size(); ++i)
        if (!mask_[i]) dy[i] = 0.0f;
}

void Gelu::forward(float *x, size_t n) {
    x_cache_.assign(x, x + n);
    constexpr float kInvSqrt2 = 0.7071067811865476f;
    for (size_t i = 0; i < n; ++i) x[i] = 0.5f * x[i] * (1.0f + std::erf(x[i] * kInvSqrt2));
}

void Gelu::backward(float *dy) const {
    constexpr double kInvSqrt2 = 0.7071067811865476;
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    for (size_t i = 0; i < x_cache_.size(); ++i) {
        const double x = x_cache_[i];
        const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        dy[i] = static_cast<float>(dy[i] * (cdf + x * pdf));
    }
}

// ---------------------------------------------------------------------------
// Multi-head self-attention
// ---------------------------------------------------------------------------

MultiHeadAttention::MultiHeadAttention(std::string name, int embed_, int heads_)
    : qkv(name + ".qkv", embed_, 3 * embed_),
      proj(name + ".proj", embed_, embed_),
      embed(embed_),
      heads(heads_),
      head_dim(embed_ / heads_) {
    if (embed_ % heads_ != 0) throw std::invalid_argument("embed must divide by heads");
}

void MultiHeadAttention::init(Rng &rng, double weight_scale) {
    qkv.init(rng, weight_scale);
    proj.init(rng, weight_scale);
}

void MultiHeadAttention::collect_params(std::vector<Param *> *out) {
    out->push_back(&qkv.weight);
    out->push_back(&qkv.bias);
    out->push_back(&proj.weight);
    out->push_back(&proj.bias);
}

void MultiHeadAttention::forward(const float *x, int n, Tensor *y) {
    n_ = n;
    const int dh = head_dim;
    qkv.forward(x, n, &qkv_out_);
    const size_t head_sz = static_cast<size_t>(n) * dh;
    q_.resize(head_sz * heads);
    k_.resize(head_sz * heads);
    v_.resize(head_sz * heads);
    for (int h = 0; h < heads; ++h) {
        for (int i = 0; i < n; ++i) {
            const float *row = qkv_out_.data() + static_cast<size_t>(i) * 3 * embed;
            std::memcpy(q_.data() + h * head_sz + static_cast<size_t>(i) * dh,
                        row + h * dh, sizeof(float) * dh);
            std::memcpy(k_.data() + h * head_sz + static_cast<size_t>(i) * dh,
                        row + embed + h * dh, sizeof(float) * dh);
            std::memcpy(v_.data() + h * head_sz + static_cast<size_t>(i) * dh,
                        row + 2 * embed + h * dh, sizeof(float) * dh);
        }
    }
    probs_.resize(static_cast<size_t>(heads) * n * n);
    merged_.resize(static_cast<size_t>(n) * embed);
    const float scale = static_cast<float>(1.0 / std::sqrt(static_cast<double>(dh)));
    std::vector<float> o_head(head_sz);
    for (int h = 0; h < heads; ++h) {
        float *p = probs_.data() + static_cast<size_t>(h) * n * n;
        gemm(false, true, n, n, dh, scale, q_.data() + h * head_sz,
             k_.data() + h * head_sz, 0.0f, p);
        for (int i = 0; i < n; ++i) {
            float *row = p + static_cast<size_t>(i) * n;
            float mx = row[0];
            for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
            double sum = 0;
            for (int j = 0; j < n; ++j) {
                row[j] = std::exp(row[j] - mx);
                sum += row[j];
            }
            const float inv = static_cast<float>(1.0 / sum);
            for (int j = 0; j < n; ++j) row[j] *= inv;
        }
        gemm(false, false, n, dh, n, 1.0f, p, v_.data() + h * head_sz, 0.0f,
             o_head.data());
        for (int i = 0; i < n; ++i)
            std::memcpy(merged_.data() + static_cast<size_t>(i) * embed + h * dh,
                        o_head.data() + static_cast<size_t>(i) * dh, sizeof(float) * dh);
    }
    proj.forward(merged_.data(), n, y);
}

void MultiHeadAttention::backward(const float *dy, float *dx) {
    const int n = n_;
    const int dh = head_dim;
    const size_t head_sz = static_cast<size_t>(n) * dh;
    std::vector<float> dmerged(static_cast<size_t>(n) * embed);
    proj.backward(dy, dmerged.data());
    std::vector<float> dqkv(static_cast<size_t>(n) * 3 * embed, 0.0f);
    std::vector<float> do_head(head_sz), dq(head_sz), dk(head_sz), dv(head_sz);
    std::vector<float> dp(static_cast<size_t>(n) * n);
    const float scale = static_cast<float>(1.0 / std::sqrt(static_cast<double>(dh)));
    for (int h = 0; h < heads; ++h) {
        for (int i = 0; i < n; ++i)
            std::memcpy(do_head.data() + static_cast<size_t>(i) * dh,
                        dmerged.data() + static_cast<size_t>(i) * embed + h * dh,
                        sizeof(float) * dh);
        const float *p = probs_.data() + static_cast<size_t>(h) * n * n;
        // dV = P^T * dO, dP = dO * V^T.
        gemm(true, false, n, dh, n, 1.0f, p, do_head.data(), 0.0f, dv.data());
        gemm(false, true, n, n, dh, 1.0f, do_head.data(), v_.data() + h * head_sz, 0.0f,
             dp.data());
        for (int i = 0; i < n; ++i) {
            float *dpr = dp.data() + static_cast<size_t>(i) * n;
            const float *pr = p + static_cast<size_t>(i) * n;
            double dot = 0;
            for (int j = 0; j < n; ++j) dot += static_cast<double>(dpr[j]) * pr[j];
            for (int j = 0; j < n; ++j)
                dpr[j] = static_cast<float>(pr[j] * (dpr[j] - dot));
        }
        gemm(false, false, n, dh, n, scale, dp.data(), k_.data() + h * head_sz, 0.0f,
             dq.data());
        gemm(true, false, n, dh, n, scale, dp.data(), q_.data() + h * head_sz, 0.0f,
             dk.data());
        for (int i = 0; i < n; ++i) {
            float *row = dqkv.data() + static_cast<size_t>(i) * 3 * embed;
            std::memcpy(row + h * dh, dq.data() + static_cast<size_t>(i) * dh,
                        sizeof(float) * dh);
            std::memcpy(row + embed + h * dh, dk.data() + static_cast<size_t>(i) * dh,
                        sizeof(float) * dh);
            std::memcpy(row + 2 * embed + h * dh, dv.data() + static_cast<size_t>(i) * dh,
                        sizeof(float) * dh);
        }
    }
    qkv.backward(dqkv.data(), dx);
}

// ---------------------------------------------------------------------------
// Transformer block
// ---------------------------------------------------------------------------

TransformerBlock::TransformerBlock(std::string name, int embed, int heads, int mlp_dim)
    : ln1(name + ".ln1", embed),
      ln2(name + ".ln2", embed),
      attn(name + ".attn", embed, heads),
      fc1(name + ".fc1", embed, mlp_dim),
      fc2(name + ".fc2", mlp_dim, embed),
      embed_(embed) {}

void TransformerBlock::init(Rng &rng) {
    ln1.init();
    ln2.init();
    attn.init(rng, 0.02);
    fc1.init(rng, 0.02);
    fc2.init(rng, 0.02);
}

void TransformerBlock::collect_params(std::vector<Param *> *out) {
    out->push_back(&ln1.gamma);
    out->push_back(&ln1.beta);
    attn.collect_params(out);
    out->push_back(&ln2.gamma);
    out->push_back(&ln2.beta);
    out->push_back(&fc1.weight);
    out->push_back(&fc1.bias);
    out->push_back(&fc2.weight);
    out->push_back(&fc2.bias);
}

void TransformerBlock::forward(const float *x, int n, Tensor *y) {
    n_ = n;
    ln1.forward(x, n, &ln1_out_);
    attn.forward(ln1_out_.data(), n, &attn_out_);
    x1_ = Tensor({n, embed_});
    for (size_t i = 0; i < x1_.numel(); ++i) x1_.v[i] = x[i] + attn_out_.v[i];
    ln2.forward(x1_.data(), n, &ln2_out_);
    fc1.forward(ln2_out_.data(), n, &fc1_out_);
    gelu.forward(fc1_out_.data(), fc1_out_.numel());
    fc2.forward(fc1_out_.data(), n, &fc2_out_);
    *y = Tensor({n, embed_});
    for (size_t i = 0; i < y->numel(); ++i) y->v[i] = x1_.v[i] + fc2_out_.v[i];
}

void TransformerBlock::backward(const float *dy, float *dx) {
    const int n = n_;
    const size_t ne = static_cast<size_t>(n) * embed_;
    std::vector<float> dmlp_hidden(fc1_out_.numel());
    std::vector<float> dln2_out(ne);
    std::vector<float> dx1(dy, dy + ne);
    fc2.backward(dy, dmlp_hidden.data());
    gelu.backward(dmlp_hidden.data());
    fc1.backward(dmlp_hidden.data(), dln2_out.data());
    scratch_.resize(ne);
    ln2.backward(dln2_out.data(), scratch_.data());
    for (size_t i = 0; i < ne; ++i) dx1[i] += scratch_[i];
    std::memcpy(dx, dx1.data(), sizeof(float) * ne);
    std::vector<float> dln1_out(ne);
    attn.backward(dx1.data(), dln1_out.data());
    ln1.backward(dln1_out.data(), scratch_.data());
    for (size_t i = 0; i < ne; ++i) dx[i] += scratch_[i];
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

Adam::Adam(std::vector<Param *> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(params_[i]->w.numel(), 0.0f);
        v_[i].assign(params_[i]->w.numel(), 0.0f);
    }
}

void Adam::zero_grad() {
    for (Param *p : params_) p->g.zero();
}

void Adam::scale_grad(double s) {
    const float fs = static_cast<float>(s);
    for (Param *p : params_)
        for (float &g : p->g.v) g *= fs;
}

void Adam::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Param *p = params_[i];
        float *m = m_[i].data();
        float *v = v_[i].data();
        for (size_t j = 0; j < p->w.numel(); ++j) {
            const double g = p->g.v[j];
            m[j] = static_cast<float>(beta1_ * m[j] + (1.0 - beta1_) * g);
            v[j] = static_cast<float>(beta2_ * v[j] + (1.0 - beta2_) * g * g);
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p->w.v[j] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps_));
        }
    }
}

// ---------------------------------------------------------------------------
// Losses and helpers
// ---------------------------------------------------------------------------

double softmax_cross_entropy(const float *logits, int n, int k, const int *labels,
                             float *dlogits) {
    double loss = 0;
    std::vector<double> p(k);
    for (int i = 0; i < n; ++i) {
        const float *row = logits + static_cast<size_t>(i) * k;
        double mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
        double sum = 0;
        for (int j = 0; j < k; ++j) {
            p[j] = std::exp(row[j] - mx);
            sum += p[j];
        }
        const int label = labels[i];
        // log-sum-exp form stays finite even for strongly negative logits.
        loss += std::log(sum) - (row[label] - mx);
        if (dlogits != nullptr) {
            float *drow = dlogits + static_cast<size_t>(i) * k;
            for (int j = 0; j < k; ++j) {
                const double soft = p[j] / sum;
                drow[j] = static_cast<float>((soft - (j == label ? 1.0 : 0.0)) / n);
            }
        }
    }
    return loss / n;
}

void argmax_rows(const float *logits, int n, int k, int *out) {
    for (int i = 0; i < n; ++i) {
        const float *row = logits + static_cast<size_t>(i) * k;
        int best = 0;
        for (int j = 1; j < k; ++j)
            if (row[j] > row[best]) best = j;
        out[i] = best;
    }
}

size_t total_param_count(const std::vector<Param *> &params) {
    size_t n = 0;
    for (const Param *p : params) n += p->w.numel();
    return n;
}

uint64_t param_checksum(const std::vector<Param *> &params) {
    uint64_t h = 1469598103934665603ull;
    for (const Param *p : params) {
        for (float v : p->w.v) {
            uint32_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            for (int b = 0; b < 4; ++b) {
                h ^= (bits >> (8 * b)) & 0xffu;
                h *= 1099511628211ull;
            }
        }
    }
    return h;
}

}  // namespace vqtl::nn

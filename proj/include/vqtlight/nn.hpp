// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vqtlight/image.hpp"

namespace vqtl::nn {

/// Dense float tensor with an explicit shape. Storage is row-major in the
/// listed dimension order.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, float fill = 0.0f) : shape(std::move(s)) {
        v.assign(numel_of(shape), fill);
    }
    static size_t numel_of(const std::vector<int> &s) {
        size_t n = 1;
        for (int d : s) n *= static_cast<size_t>(d);
        return n;
    }
    size_t numel() const { return v.size(); }
    float *data() { return v.data(); }
    const float *data() const { return v.data(); }
    void zero() { std::fill(v.begin(), v.end(), 0.0f); }
    bool all_finite() const;
};

/// A learnable weight with its gradient accumulator.
struct Param {
    std::string name;
    Tensor w;
    Tensor g;

    void init_shape(std::string n, std::vector<int> s) {
        name = std::move(n);
        w = Tensor(s);
        g = Tensor(std::move(s));
    }
};

/// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C.
/// op(A) is M x K, op(B) is K x N, C is M x N.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float *a,
          const float *b, float beta, float *c);

// ---------------------------------------------------------------------------
// im2col / col2im for stride-s, pad-p, k x k kernels on CHW tensors.
// col has shape (C*k*k) x (OH*OW) with OH = (H + 2p - k) / s + 1.
// ---------------------------------------------------------------------------
void im2col(const float *src, int c, int h, int w, int k, int stride, int pad, float *col);
void col2im(const float *col, int c, int h, int w, int k, int stride, int pad, float *dst);
int conv_out_extent(int extent, int k, int stride, int pad);

/// 2-D convolution. Weight layout: (out_c, in_c*k*k); bias (out_c).
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(std::string name, int in_c, int out_c, int k, int stride, int pad);

    void init(Rng &rng, double weight_scale = 0.0);
    /// x: in_c x h x w  ->  y: out_c x oh x ow. Caches x for backward.
    void forward(const float *x, int h, int w, Tensor *y);
    /// dy matches the last forward's output. Accumulates into param grads,
    /// writes dx (same shape as x) if dx != nullptr.
    void backward(const float *dy, float *dx);

    Param weight, bias;
    int in_c = 0, out_c = 0, k = 0, stride = 0, pad = 0;

private:
    int h_ = 0, w_ = 0, oh_ = 0, ow_ = 0;
    std::vector<float> col_;
};

/// 2-D transposed convolution (stride-2 upsampling). Weight layout:
/// (in_c, out_c*k*k); bias (out_c). Output spatial extent is
/// (h-1)*stride - 2*pad + k.
class ConvTranspose2d {
public:
    ConvTranspose2d() = default;
    ConvTranspose2d(std::string name, int in_c, int out_c, int k, int stride, int pad);

    void init(Rng &rng, double weight_scale = 0.0);
    void forward(const float *x, int h, int w, Tensor *y);
    void backward(const float *dy, float *dx);

    Param weight, bias;
    int in_c = 0, out_c = 0, k = 0, stride = 0, pad = 0;

private:
    int h_ = 0, w_ = 0, oh_ = 0, ow_ = 0;
    std::vector<float> col_;
    std::vector<float> x_cache_;
};

/// Fully connected layer on a sequence: x (n x in) -> y (n x out).
/// Weight layout: (out, in).
class Linear {
public:
    Linear() = default;
    Linear(std::string name, int in_dim, int out_dim);

    void init(Rng &rng, double weight_scale);
    void forward(const float *x, int n, Tensor *y);
    void backward(const float *dy, float *dx);

    Param weight, bias;
    int in_dim = 0, out_dim = 0;

private:
    int n_ = 0;
    std::vector<float> x_cache_;
};

/// Per-row layer normalization over the last dimension.
class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(std::string name, int dim);

    void init();
    void forward(const float *x, int n, Tensor *y);
    void backward(const float *dy, float *dx);

    Param gamma, beta;
    int dim = 0;

private:
    int n_ = 0;
    std::vector<float> xhat_;
    std::vector<float> inv_std_;
    static constexpr float kEps = 1e-5f;
};

/// ReLU with cached mask.
class ReLU {
public:
    void forward(float *x, size_t n);            // in place
    void backward(float *dy) const;              // in place
private:
    std::vector<unsigned char> mask_;
};

/// Exact GELU (erf form) with cached input.
class Gelu {
public:
    void forward(float *x, size_t n);            // in place
    void backward(float *dy) const;              // in place
private:
    std::vector<float> x_cache_;
};

/// Multi-head self-attention over a sequence of n tokens of width embed.
class MultiHeadAttention {
public:
    MultiHeadAttention() = default;
    MultiHeadAttention(std::string name, int embed, int heads);

    void init(Rng &rng, double weight_scale);
    void forward(const float *x, int n, Tensor *y);
    void backward(const float *dy, float *dx);

    void collect_params(std::vector<Param *> *out);

    Linear qkv;   // embed -> 3*embed
    Linear proj;  // embed -> embed
    int embed = 0, heads = 0, head_dim = 0;

private:
    int n_ = 0;
    Tensor qkv_out_;
    std::vector<float> probs_;    // heads x n x n softmax rows
    std::vector<float> merged_;   // n x embed concatenated head outputs
    std::vector<float> q_, k_, v_;  // heads x n x head_dim contiguous
};

/// Pre-norm transformer encoder block:
/// x += MHSA(LN1(x)); x += MLP(LN2(x)) with a GELU MLP of width mlp_dim.
class TransformerBlock {
public:
    TransformerBlock() = default;
    TransformerBlock(std::string name, int embed, int heads, int mlp_dim);

    void init(Rng &rng);
    void forward(const float *x, int n, Tensor *y);
    void backward(const float *dy, float *dx);
    void collect_params(std::vector<Param *> *out);

    LayerNorm ln1, ln2;
    MultiHeadAttention attn;
    Linear fc1, fc2;
    Gelu gelu;

private:
    int n_ = 0, embed_ = 0;
    Tensor ln1_out_, attn_out_, x1_, ln2_out_, fc1_out_, fc2_out_;
    std::vector<float> scratch_;
};

/// Adam with bias correction. Holds first/second moment per registered param.
class Adam {
public:
    Adam(std::vector<Param *> params, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    void zero_grad();
    /// Applies one update with the given learning rate and advances the step.
    void step(double lr);
    /// Scales all gradients by a constant (used to average over a batch).
    void scale_grad(double s);

    int64_t steps() const { return t_; }

private:
    std::vector<Param *> params_;
    std::vector<std::vector<float>> m_, v_;
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

/// Softmax cross entropy over rows of logits (n x k) against integer labels.
/// Returns mean loss; writes dlogits = (softmax - onehot)/n when requested.
double softmax_cross_entropy(const float *logits, int n, int k, const int *labels,
                             float *dlogits);

/// Row-wise argmax with lowest-index tie breaking.
void argmax_rows(const float *logits, int n, int k, int *out);

size_t total_param_count(const std::vector<Param *> &params);

/// FNV-1a hash over the raw bit patterns of all parameter values, in order.
/// Any single-bit change to any weight changes the checksum.
uint64_t param_checksum(const std::vector<Param *> &params);

}  // namespace vqtl::nn

// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "vqtlight/image.hpp"
#include "vqtlight/nn.hpp"

namespace vqtl {

/// Latent feature grid. Cell-major storage: v[(row*w + col)*d + c], so each
/// cell's D-vector is contiguous.
struct LatentGrid {
    int h = 0, w = 0, d = 0;
    bool quantized = false;
    std::vector<float> v;

    LatentGrid() = default;
    LatentGrid(int h_, int w_, int d_)
        : h(h_), w(w_), d(d_), v(static_cast<size_t>(h_) * w_ * d_, 0.0f) {}
    float *cell(int row, int col) { return v.data() + (static_cast<size_t>(row) * w + col) * d; }
    const float *cell(int row, int col) const {
        return v.data() + (static_cast<size_t>(row) * w + col) * d;
    }
};

struct VQVAEConfig {
    int side = 128;       // square map extent; must be divisible by 4
    int k = 128;          // codebook entries
    int d = 256;          // embedding width
    int enc_hidden = 128; // first conv width (also first decoder upsample width)
    int dec_hidden = 32;  // second decoder upsample width
    double beta = 0.25;   // commitment weight

    int latent_extent() const { return side / 4; }
    int token_count() const { return latent_extent() * latent_extent(); }
};

/// Residual unit: 3x3 conv, ReLU, 3x3 conv, identity skip. The activation on
/// the summed output belongs to the caller.
class ResBlock {
public:
    ResBlock() = default;
    ResBlock(std::string name, int channels);
    void init(Rng &rng);
    void forward(const float *x, int h, int w, nn::Tensor *y);
    void backward(const float *dy, float *dx);
    void collect_params(std::vector<nn::Param *> *out);

    nn::Conv2d conv1, conv2;

private:
    nn::ReLU relu_;
    nn::Tensor mid_;
    size_t numel_ = 0;
};

/// Nearest-codebook-entry assignment for every cell; squared distances are
/// accumulated in double and ties resolve to the lowest index.
void quantize_cells(const LatentGrid &z_e, const float *codebook, int k,
                    LatentGrid *z_q, std::vector<int> *indices);

/// Per-term loss values. Note emb and com share the same squared distance;
/// they differ only in which side the gradient reaches.
struct VQVAELossTerms {
    double rec = 0, emb = 0, com = 0;
};

/// Selects which loss terms contribute gradients in a training step.
struct VQVAEStepMask {
    bool rec = true, emb = true, com = true;
};

double vqvae_loss(const Image &recon, const Image &target, const LatentGrid &z_e,
                  const LatentGrid &z_q, double beta);

class VQVAE {
public:
    explicit VQVAE(const VQVAEConfig &cfg);

    void init(Rng &rng);
    std::vector<nn::Param *> params();
    size_t param_count();

    /// Linear-radiance square map (side x side x 3) -> continuous latents.
    /// The encoder consumes log1p radiance internally.
    LatentGrid encode(const Image &map_sp);
    /// Quantized latents -> linear-radiance square map (expm1, clamped at 0).
    Image decode(const LatentGrid &z_q);

    std::pair<LatentGrid, std::vector<int>> quantize(const LatentGrid &z_e) const;
    /// Rebuilds z_q directly from an index sequence.
    LatentGrid embed_indices(const std::vector<int> &indices) const;

    /// Full training forward+backward on one map. Accumulates parameter
    /// gradients (callers zero/scale/step via the optimizer). Returns the
    /// masked loss; per-term values and the index assignment are optional.
    double train_step(const Image &target, const VQVAEStepMask &mask,
                      VQVAELossTerms *terms = nullptr,
                      std::vector<int> *indices = nullptr);

    /// Forward-only loss terms for one map. No gradients are touched.
    VQVAELossTerms eval_terms(const Image &target,
                              std::vector<int> *indices = nullptr);

    /// Decoder-only gradient of the reconstruction term with respect to the
    /// decoder input, for the latents of the most recent decode(). Parameter
    /// gradients of the decoder are accumulated as a side effect.
    std::vector<float> recon_input_grad(const Image &target);

    const std::vector<float> &last_dz_e() const { return dz_e_debug_; }
    const std::vector<float> &last_dz_q() const { return dz_q_debug_; }
    const nn::Tensor &last_decode_log() const { return dec_out_; }

    const VQVAEConfig &config() const { return cfg_; }
    nn::Param &codebook() { return codebook_; }
    const nn::Param &codebook() const { return codebook_; }

private:
    nn::Tensor encode_log_chw(const nn::Tensor &x_log);
    nn::Tensor decode_log_chw(const nn::Tensor &zq_chw);
    void decoder_backward(const float *dy_log, float *dzq_chw);
    void encoder_backward(const float *dz_e_chw);

    VQVAEConfig cfg_;
    nn::Conv2d enc1_, enc2_;
    ResBlock enc_res1_, enc_res2_;
    nn::ConvTranspose2d dec_t1_, dec_t2_;
    ResBlock dec_res1_, dec_res2_;
    nn::Conv2d dec_out_conv_;
    nn::Param codebook_;

    nn::ReLU enc_relu1_, enc_relu2_, enc_relu3_, enc_relu4_;
    nn::ReLU dec_relu1_, dec_relu2_, dec_relu3_, dec_relu4_;
    nn::Tensor enc_a1_, enc_a2_, enc_r1_, enc_r2_;
    nn::Tensor dec_a1_, dec_r1_, dec_a2_, dec_r2_, dec_out_;
    std::vector<float> dz_e_debug_, dz_q_debug_;
};

/// Log-space reconstruction error between two linear-radiance images:
/// sqrt(mean((log1p(a) - log1p(b))^2)).
double log_rmse(const Image &a, const Image &b);

}  // namespace vqtl

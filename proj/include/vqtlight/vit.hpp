// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>
#include <vector>

#include "vqtlight/image.hpp"
#include "vqtlight/nn.hpp"

namespace vqtl {

struct ViTConfig {
    int image_side = 256;
    int patch = 8;
    int k = 128;    // classes = codebook entries
    int embed = 256;
    int depth = 6;
    int heads = 8;
    int mlp_dim = 1024;
    // Variant switches. extra_class_tokens prepends that many learnable
    // tokens and reads logits from them instead of the patch tokens.
    int extra_class_tokens = 0;
    bool cnn_backbone = false;

    int grid() const { return image_side / patch; }
    int n() const { return grid() * grid(); }
    int dp() const { return patch * patch * 3; }
};

/// Cuts a [0,1] image into non-overlapping patches. Output is N x Dp with
/// patches in row-major grid order; within a patch, pixels are row-major
/// with channels interleaved last.
nn::Tensor patchify(const Image &crop, int patch);

/// Inverse of patchify; used to check the partition round trip.
Image unpatchify(const nn::Tensor &patches, int image_side, int patch);

/// Mean softmax cross entropy over token rows.
double vit_loss(const nn::Tensor &logits, const std::vector<int> &labels);

/// Per-row argmax, ties to the lowest index.
std::vector<int> predict_indices(const nn::Tensor &logits);

class ViT {
public:
    explicit ViT(const ViTConfig &cfg);

    void init(Rng &rng);
    std::vector<nn::Param *> params();
    size_t param_count();

    /// Patch sequence (N x Dp) -> token logits (N x K). Caches for backward.
    nn::Tensor forward(const nn::Tensor &patches);
    /// Image-level entry point that also serves the CNN variant.
    nn::Tensor forward_image(const Image &crop);

    /// Forward + cross entropy + full backward; accumulates gradients and
    /// returns the loss.
    double train_step(const Image &crop, const std::vector<int> &labels,
                      nn::Tensor *logits_out = nullptr);

    std::vector<int> predict(const Image &crop);

    const ViTConfig &config() const { return cfg_; }

private:
    nn::Tensor forward_transformer(const nn::Tensor &patches);
    nn::Tensor forward_cnn(const Image &crop);
    void backward_transformer(const nn::Tensor &dlogits);
    void backward_cnn(const nn::Tensor &dlogits);

    ViTConfig cfg_;

    // Transformer path.
    nn::Linear patch_proj_;
    nn::Param pos_;   // N x embed
    nn::Param cls_;   // extra_class_tokens x embed (empty when unused)
    std::vector<nn::TransformerBlock> blocks_;
    nn::LayerNorm head_ln_;
    nn::Linear head_fc_;
    std::vector<nn::Tensor> acts_;   // per-block inputs plus final output
    nn::Tensor head_ln_out_;
    int head_rows_ = 0;

    // CNN path (parameter-matched variant).
    nn::Conv2d cnn_stem1_, cnn_stem2_, cnn_stem3_;
    std::vector<nn::Conv2d> cnn_mid_;
    nn::Conv2d cnn_head_;
    std::vector<nn::ReLU> cnn_relus_;
    std::vector<nn::Tensor> cnn_acts_;
};

}  // namespace vqtl

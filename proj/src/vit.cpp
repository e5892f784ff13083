// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#include "vqtlight/vit.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace vqtl {

nn::Tensor patchify(const Image &crop, int patch) {
    if (crop.c != 3 || crop.h != crop.w || crop.h % patch != 0)
        throw std::invalid_argument("patchify: image must be square RGB, side divisible by patch");
    for (float v : crop.data)
        if (!(v >= 0.0f && v <= 1.0f))
            throw std::invalid_argument("patchify: values must lie in [0,1]");
    const int grid = crop.h / patch;
    const int n = grid * grid;
    const int dp = patch * patch * 3;
    nn::Tensor out({n, dp});
    for (int pr = 0; pr < grid; ++pr)
        for (int pc = 0; pc < grid; ++pc) {
            float *row = out.data() + (static_cast<size_t>(pr) * grid + pc) * dp;
            int j = 0;
            for (int py = 0; py < patch; ++py)
                for (int px = 0; px < patch; ++px)
                    for (int c = 0; c < 3; ++c)
                        row[j++] = crop.at(pr * patch + py, pc * patch + px, c);
        }
    return out;
}

Image unpatchify(const nn::Tensor &patches, int image_side, int patch) {
    const int grid = image_side / patch;
    const int dp = patch * patch * 3;
    if (patches.shape.size() != 2 || patches.shape[0] != grid * grid ||
        patches.shape[1] != dp)
        throw std::invalid_argument("unpatchify: shape mismatch");
    Image out(image_side, image_side, 3);
    for (int pr = 0; pr < grid; ++pr)
        for (int pc = 0; pc < grid; ++pc) {
            const float *row = patches.data() + (static_cast<size_t>(pr) * grid + pc) * dp;
            int j = 0;
            for (int py = 0; py < patch; ++py)
                for (int px = 0; px < patch; ++px)
                    for (int c = 0; c < 3; ++c)
                        out.at(pr * patch + py, pc * patch + px, c) = row[j++];
        }
    return out;
}

double vit_loss(const nn::Tensor &logits, const std::vector<int> &labels) {
    if (logits.shape.size() != 2 || logits.shape[0] != static_cast<int>(labels.size()))
        throw std::invalid_argument("vit_loss: row/label count mismatch");
    const int k = logits.shape[1];
    for (int label : labels)
        if (label < 0 || label >= k) throw std::invalid_argument("vit_loss: label out of range");
    return nn::softmax_cross_entropy(logits.data(), logits.shape[0], k, labels.data(),
                                     nullptr);
}

std::vector<int> predict_indices(const nn::Tensor &logits) {
    if (logits.shape.size() != 2) throw std::invalid_argument("predict_indices: not 2-D");
    if (!logits.all_finite()) throw std::invalid_argument("predict_indices: non-finite logits");
    std::vector<int> out(logits.shape[0]);
    nn::argmax_rows(logits.data(), logits.shape[0], logits.shape[1], out.data());
    return out;
}

// ---------------------------------------------------------------------------
// ViT
// ---------------------------------------------------------------------------

namespace {
// Widths of the convolutional variant, chosen so its parameter count lands
// near the transformer's (same order, within a fifth).
constexpr int kCnnStem1 = 64, kCnnStem2 = 128, kCnnWidth = 256, kCnnMidLayers = 6;
}  // namespace

ViT::ViT(const ViTConfig &cfg) : cfg_(cfg) {
    if (cfg.image_side % cfg.patch != 0)
        throw std::invalid_argument("ViT: patch must divide image side");
    if (cfg.embed % cfg.heads != 0)
        throw std::invalid_argument("ViT: heads must divide embed width");
    if (cfg.cnn_backbone && cfg.extra_class_tokens > 0)
        throw std::invalid_argument("ViT: class tokens require the transformer backbone");
    if (cfg.cnn_backbone) {
        if (cfg.image_side / 8 != cfg.grid())
            throw std::invalid_argument("ViT: cnn backbone requires an 8x downsample grid");
        cnn_stem1_ = nn::Conv2d("cnn_stem1", 3, kCnnStem1, 4, 2, 1);
        cnn_stem2_ = nn::Conv2d("cnn_stem2", kCnnStem1, kCnnStem2, 4, 2, 1);
        cnn_stem3_ = nn::Conv2d("cnn_stem3", kCnnStem2, kCnnWidth, 4, 2, 1);
        for (int i = 0; i < kCnnMidLayers; ++i)
            cnn_mid_.emplace_back("cnn_mid" + std::to_string(i), kCnnWidth, kCnnWidth, 3, 1, 1);
        cnn_head_ = nn::Conv2d("cnn_head", kCnnWidth, cfg.k, 1, 1, 0);
        cnn_relus_.resize(3 + kCnnMidLayers);
    } else {
        patch_proj_ = nn::Linear("patch_proj", cfg.dp(), cfg.embed);
        pos_.init_shape("pos_embed", {cfg.n(), cfg.embed});
        if (cfg.extra_class_tokens > 0)
            cls_.init_shape("class_tokens", {cfg.extra_class_tokens, cfg.embed});
        for (int i = 0; i < cfg.depth; ++i)
            blocks_.emplace_back("block" + std::to_string(i), cfg.embed, cfg.heads,
                                 cfg.mlp_dim);
        head_ln_ = nn::LayerNorm("head_ln", cfg.embed);
        head_fc_ = nn::Linear("head_fc", cfg.embed, cfg.k);
    }
}

void ViT::init(Rng &rng) {
    if (cfg_.cnn_backbone) {
        cnn_stem1_.init(rng);
        cnn_stem2_.init(rng);
        cnn_stem3_.init(rng);
        for (auto &c : cnn_mid_) c.init(rng);
        cnn_head_.init(rng);
        return;
    }
    patch_proj_.init(rng, 0.02);
    for (auto &x : pos_.w.v) x = static_cast<float>(rng.normal() * 0.02);
    for (auto &x : cls_.w.v) x = static_cast<float>(rng.normal() * 0.02);
    for (auto &b : blocks_) b.init(rng);
    head_ln_.init();
    head_fc_.init(rng, 0.02);
}

std::vector<nn::Param *> ViT::params() {
    std::vector<nn::Param *> out;
    if (cfg_.cnn_backbone) {
        for (nn::Conv2d *c : {&cnn_stem1_, &cnn_stem2_, &cnn_stem3_}) {
            out.push_back(&c->weight);
            out.push_back(&c->bias);
        }
        for (auto &c : cnn_mid_) {
            out.push_back(&c.weight);
            out.push_back(&c.bias);
        }
        out.push_back(&cnn_head_.weight);
        out.push_back(&cnn_head_.bias);
        return out;
    }
    out.push_back(&patch_proj_.weight);
    out.push_back(&patch_proj_.bias);
    out.push_back(&pos_);
    if (cfg_.extra_class_tokens > 0) out.push_back(&cls_);
    for (auto &b : blocks_) b.collect_params(&out);
    out.push_back(&head_ln_.gamma);
    out.push_back(&head_ln_.beta);
    out.push_back(&head_fc_.weight);
    out.push_back(&head_fc_.bias);
    return out;
}

size_t ViT::param_count() {
    auto p = params();
    return nn::total_param_count(p);
}

nn::Tensor ViT::forward_transformer(const nn::Tensor &patches) {
    const int n = cfg_.n();
    const int m = cfg_.extra_class_tokens;
    const int l = n + m;
    const int e = cfg_.embed;
    if (patches.shape.size() != 2 || patches.shape[0] != n || patches.shape[1] != cfg_.dp())
        throw std::invalid_argument("vit: patch sequence shape mismatch");
    if (!patches.all_finite()) throw std::invalid_argument("vit: non-finite patches");

    nn::Tensor tok;
    patch_proj_.forward(patches.data(), n, &tok);
    acts_.assign(static_cast<size_t>(cfg_.depth) + 1, nn::Tensor());
    acts_[0] = nn::Tensor({l, e});
    if (m > 0)
        std::memcpy(acts_[0].data(), cls_.w.data(), sizeof(float) * static_cast<size_t>(m) * e);
    float *patch_rows = acts_[0].data() + static_cast<size_t>(m) * e;
    for (size_t i = 0; i < tok.numel(); ++i) patch_rows[i] = tok.v[i] + pos_.w.v[i];

    for (int b = 0; b < cfg_.depth; ++b)
        blocks_[b].forward(acts_[b].data(), l, &acts_[b + 1]);

    head_rows_ = m > 0 ? m : l;
    head_ln_.forward(acts_[cfg_.depth].data(), head_rows_, &head_ln_out_);
    nn::Tensor logits;
    head_fc_.forward(head_ln_out_.data(), head_rows_, &logits);
    return logits;
}

void ViT::backward_transformer(const nn::Tensor &dlogits) {
    const int n = cfg_.n();
    const int m = cfg_.extra_class_tokens;
    const int l = n + m;
    const int e = cfg_.embed;
    std::vector<float> d_ln_out(static_cast<size_t>(head_rows_) * e);
    head_fc_.backward(dlogits.data(), d_ln_out.data());
    std::vector<float> d_head_in(static_cast<size_t>(head_rows_) * e);
    head_ln_.backward(d_ln_out.data(), d_head_in.data());

    std::vector<float> dx(static_cast<size_t>(l) * e, 0.0f);
    std::memcpy(dx.data(), d_head_in.data(), sizeof(float) * d_head_in.size());
    std::vector<float> dx_prev(dx.size());
    for (int b = cfg_.depth - 1; b >= 0; --b) {
        blocks_[b].backward(dx.data(), dx_prev.data());
        dx.swap(dx_prev);
    }
    if (m > 0)
        for (size_t i = 0; i < cls_.w.numel(); ++i) cls_.g.v[i] += dx[i];
    const float *patch_rows = dx.data() + static_cast<size_t>(m) * e;
    for (size_t i = 0; i < pos_.w.numel(); ++i) pos_.g.v[i] += patch_rows[i];
    patch_proj_.backward(patch_rows, nullptr);
}

nn::Tensor ViT::forward_cnn(const Image &crop) {
    const int s = cfg_.image_side;
    // CHW copy; the variant consumes the same [0,1] crop as patchify does.
    nn::Tensor x({3, s, s});
    for (float v : crop.data)
        if (!(v >= 0.0f && v <= 1.0f))
            throw std::invalid_argument("vit: crop values must lie in [0,1]");
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < s; ++y)
            for (int xx = 0; xx < s; ++xx)
                x.v[(static_cast<size_t>(c) * s + y) * s + xx] = crop.at(y, xx, c);

    cnn_acts_.assign(4 + kCnnMidLayers, nn::Tensor());
    cnn_stem1_.forward(x.data(), s, s, &cnn_acts_[0]);
    cnn_relus_[0].forward(cnn_acts_[0].data(), cnn_acts_[0].numel());
    cnn_stem2_.forward(cnn_acts_[0].data(), s / 2, s / 2, &cnn_acts_[1]);
    cnn_relus_[1].forward(cnn_acts_[1].data(), cnn_acts_[1].numel());
    cnn_stem3_.forward(cnn_acts_[1].data(), s / 4, s / 4, &cnn_acts_[2]);
    cnn_relus_[2].forward(cnn_acts_[2].data(), cnn_acts_[2].numel());
    const int g = s / 8;
    for (int i = 0; i < kCnnMidLayers; ++i) {
        cnn_mid_[i].forward(cnn_acts_[2 + i].data(), g, g, &cnn_acts_[3 + i]);
        cnn_relus_[3 + i].forward(cnn_acts_[3 + i].data(), cnn_acts_[3 + i].numel());
    }
    nn::Tensor &feat = cnn_acts_[2 + kCnnMidLayers];
    cnn_head_.forward(feat.data(), g, g, &cnn_acts_[3 + kCnnMidLayers]);
    const nn::Tensor &chw = cnn_acts_[3 + kCnnMidLayers];
    nn::Tensor logits({g * g, cfg_.k});
    for (int c = 0; c < cfg_.k; ++c)
        for (int y = 0; y < g; ++y)
            for (int xx = 0; xx < g; ++xx)
                logits.v[(static_cast<size_t>(y) * g + xx) * cfg_.k + c] =
                    chw.v[(static_cast<size_t>(c) * g + y) * g + xx];
    return logits;
}

void ViT::backward_cnn(const nn::Tensor &dlogits) {
    const int g = cfg_.image_side / 8;
    nn::Tensor dchw({cfg_.k, g, g});
    for (int c = 0; c < cfg_.k; ++c)
        for (int y = 0; y < g; ++y)
            for (int xx = 0; xx < g; ++xx)
                dchw.v[(static_cast<size_t>(c) * g + y) * g + xx] =
                    dlogits.v[(static_cast<size_t>(y) * g + xx) * cfg_.k + c];
    std::vector<float> d1(cnn_acts_[2 + kCnnMidLayers].numel());
    cnn_head_.backward(dchw.data(), d1.data());
    for (int i = kCnnMidLayers - 1; i >= 0; --i) {
        cnn_relus_[3 + i].backward(d1.data());
        std::vector<float> d2(cnn_acts_[2 + i].numel());
        cnn_mid_[i].backward(d1.data(), d2.data());
        d1.swap(d2);
    }
    cnn_relus_[2].backward(d1.data());
    std::vector<float> d3(cnn_acts_[1].numel());
    cnn_stem3_.backward(d1.data(), d3.data());
    cnn_relus_[1].backward(d3.data());
    std::vector<float> d4(cnn_acts_[0].numel());
    cnn_stem2_.backward(d3.data(), d4.data());
    cnn_relus_[0].backward(d4.data());
    cnn_stem1_.backward(d4.data(), nullptr);
}

nn::Tensor ViT::forward(const nn::Tensor &patches) {
    if (cfg_.cnn_backbone)
        throw std::logic_error("vit: cnn variant takes images, not patch sequences");
    return forward_transformer(patches);
}

nn::Tensor ViT::forward_image(const Image &crop) {
    if (crop.h != cfg_.image_side || crop.w != cfg_.image_side || crop.c != 3)
        throw std::invalid_argument("vit: crop shape mismatch");
    if (cfg_.cnn_backbone) return forward_cnn(crop);
    return forward_transformer(patchify(crop, cfg_.patch));
}

double ViT::train_step(const Image &crop, const std::vector<int> &labels,
                       nn::Tensor *logits_out) {
    nn::Tensor logits = forward_image(crop);
    if (logits.shape[0] != static_cast<int>(labels.size()))
        throw std::invalid_argument("vit: label count mismatch");
    nn::Tensor dlogits({logits.shape[0], logits.shape[1]});
    const double loss = nn::softmax_cross_entropy(logits.data(), logits.shape[0],
                                                  logits.shape[1], labels.data(),
                                                  dlogits.data());
    if (cfg_.cnn_backbone)
        backward_cnn(dlogits);
    else
        backward_transformer(dlogits);
    if (logits_out != nullptr) *logits_out = std::move(logits);
    return loss;
}

std::vector<int> ViT::predict(const Image &crop) {
    return predict_indices(forward_image(crop));
}

}  // namespace vqtl

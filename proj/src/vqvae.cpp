// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#include "vqtlight/vqvae.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace vqtl {

namespace {

// HWC linear radiance -> CHW log1p tensor.
nn::Tensor to_log_chw(const Image &img) {
    nn::Tensor t({img.c, img.h, img.w});
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                t.v[(static_cast<size_t>(c) * img.h + y) * img.w + x] =
                    std::log1p(img.at(y, x, c));
    return t;
}

void check_latent(const LatentGrid &z, const VQVAEConfig &cfg, const char *what) {
    if (z.h != cfg.latent_extent() || z.w != cfg.latent_extent() || z.d != cfg.d)
        throw std::invalid_argument(std::string(what) + ": latent shape mismatch");
    for (float x : z.v)
        if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite latent");
}

}  // namespace

// ---------------------------------------------------------------------------
// ResBlock
// ---------------------------------------------------------------------------

ResBlock::ResBlock(std::string name, int channels)
    : conv1(name + ".conv1", channels, channels, 3, 1, 1),
      conv2(name + ".conv2", channels, channels, 3, 1, 1) {}

void ResBlock::init(Rng &rng) {
    conv1.init(rng);
    conv2.init(rng);
}

void ResBlock::collect_params(std::vector<nn::Param *> *out) {
    out->push_back(&conv1.weight);
    out->push_back(&conv1.bias);
    out->push_back(&conv2.weight);
    out->push_back(&conv2.bias);
}

void ResBlock::forward(const float *x, int h, int w, nn::Tensor *y) {
    conv1.forward(x, h, w, &mid_);
    relu_.forward(mid_.data(), mid_.numel());
    conv2.forward(mid_.data(), h, w, y);
    numel_ = y->numel();
    for (size_t i = 0; i < numel_; ++i) y->v[i] += x[i];
}

void ResBlock::backward(const float *dy, float *dx) {
    std::vector<float> dmid(mid_.numel());
    conv2.backward(dy, dmid.data());
    relu_.backward(dmid.data());
    conv1.backward(dmid.data(), dx);
    for (size_t i = 0; i < numel_; ++i) dx[i] += dy[i];
}

// ---------------------------------------------------------------------------
// Quantization
// ---------------------------------------------------------------------------

void quantize_cells(const LatentGrid &z_e, const float *codebook, int k,
                    LatentGrid *z_q, std::vector<int> *indices) {
    const int cells = z_e.h * z_e.w;
    const int d = z_e.d;
    *z_q = LatentGrid(z_e.h, z_e.w, d);
    z_q->quantized = true;
    indices->assign(cells, 0);
    for (int c = 0; c < cells; ++c) {
        const float *vec = z_e.v.data() + static_cast<size_t>(c) * d;
        int best = 0;
        double best_dist = 0;
        for (int e = 0; e < k; ++e) {
            const float *entry = codebook + static_cast<size_t>(e) * d;
            double dist = 0;
            for (int j = 0; j < d; ++j) {
                const double diff = static_cast<double>(vec[j]) - entry[j];
                dist += diff * diff;
            }
            if (e == 0 || dist < best_dist) {
                best_dist = dist;
                best = e;
            }
        }
        (*indices)[c] = best;
        std::memcpy(z_q->v.data() + static_cast<size_t>(c) * d,
                    codebook + static_cast<size_t>(best) * d, sizeof(float) * d);
    }
}

double vqvae_loss(const Image &recon, const Image &target, const LatentGrid &z_e,
                  const LatentGrid &z_q, double beta) {
    if (beta < 0) throw std::invalid_argument("vqvae_loss: negative beta");
    if (recon.h != target.h || recon.w != target.w ||
        recon.c != target.c)
        throw std::invalid_argument("vqvae_loss: image shape mismatch");
    if (z_e.v.size() != z_q.v.size())
        throw std::invalid_argument("vqvae_loss: latent shape mismatch");
    double rec = 0;
    for (size_t i = 0; i < recon.data.size(); ++i) {
        const double diff = std::log1p(recon.data[i]) - std::log1p(target.data[i]);
        rec += diff * diff;
    }
    rec /= static_cast<double>(recon.data.size());
    double q = 0;
    for (size_t i = 0; i < z_e.v.size(); ++i) {
        const double diff = static_cast<double>(z_e.v[i]) - z_q.v[i];
        q += diff * diff;
    }
    q /= static_cast<double>(z_e.v.size());
    return rec + q + beta * q;
}

// ---------------------------------------------------------------------------
// VQVAE
// ---------------------------------------------------------------------------

VQVAE::VQVAE(const VQVAEConfig &cfg)
    : cfg_(cfg),
      enc1_("enc1", 3, cfg.enc_hidden, 4, 2, 1),
      enc2_("enc2", cfg.enc_hidden, cfg.d, 4, 2, 1),
      enc_res1_("enc_res1", cfg.d),
      enc_res2_("enc_res2", cfg.d),
      dec_t1_("dec_t1", cfg.d, cfg.enc_hidden, 4, 2, 1),
      dec_t2_("dec_t2", cfg.enc_hidden, cfg.dec_hidden, 4, 2, 1),
      dec_res1_("dec_res1", cfg.enc_hidden),
      dec_res2_("dec_res2", cfg.dec_hidden),
      dec_out_conv_("dec_out", cfg.dec_hidden, 3, 1, 1, 0) {
    if (cfg.side < 4 || cfg.side % 4 != 0)
        throw std::invalid_argument("VQVAE: side must be a positive multiple of 4");
    if (cfg.k < 1 || cfg.d < 1) throw std::invalid_argument("VQVAE: bad codebook shape");
    if (cfg.beta < 0) throw std::invalid_argument("VQVAE: negative beta");
    codebook_.init_shape("codebook", {cfg.k, cfg.d});
}

void VQVAE::init(Rng &rng) {
    enc1_.init(rng);
    enc2_.init(rng);
    enc_res1_.init(rng);
    enc_res2_.init(rng);
    dec_t1_.init(rng);
    dec_t2_.init(rng);
    dec_res1_.init(rng);
    dec_res2_.init(rng);
    dec_out_conv_.init(rng);
    const double lim = 1.0 / cfg_.k;
    for (auto &x : codebook_.w.v) x = static_cast<float>(rng.uniform(-lim, lim));
}

std::vector<nn::Param *> VQVAE::params() {
    std::vector<nn::Param *> out;
    out.push_back(&enc1_.weight);
    out.push_back(&enc1_.bias);
    out.push_back(&enc2_.weight);
    out.push_back(&enc2_.bias);
    enc_res1_.collect_params(&out);
    enc_res2_.collect_params(&out);
    out.push_back(&codebook_);
    out.push_back(&dec_t1_.weight);
    out.push_back(&dec_t1_.bias);
    dec_res1_.collect_params(&out);
    out.push_back(&dec_t2_.weight);
    out.push_back(&dec_t2_.bias);
    dec_res2_.collect_params(&out);
    out.push_back(&dec_out_conv_.weight);
    out.push_back(&dec_out_conv_.bias);
    return out;
}

size_t VQVAE::param_count() {
    auto p = params();
    return nn::total_param_count(p);
}

nn::Tensor VQVAE::encode_log_chw(const nn::Tensor &x_log) {
    const int s = cfg_.side;
    enc1_.forward(x_log.data(), s, s, &enc_a1_);
    enc_relu1_.forward(enc_a1_.data(), enc_a1_.numel());
    enc2_.forward(enc_a1_.data(), s / 2, s / 2, &enc_a2_);
    enc_relu2_.forward(enc_a2_.data(), enc_a2_.numel());
    const int hl = cfg_.latent_extent();
    enc_res1_.forward(enc_a2_.data(), hl, hl, &enc_r1_);
    enc_relu3_.forward(enc_r1_.data(), enc_r1_.numel());
    enc_res2_.forward(enc_r1_.data(), hl, hl, &enc_r2_);
    enc_relu4_.forward(enc_r2_.data(), enc_r2_.numel());
    return enc_r2_;
}

void VQVAE::encoder_backward(const float *dz_e_chw) {
    const int hl = cfg_.latent_extent();
    const size_t latent_numel = static_cast<size_t>(cfg_.d) * hl * hl;
    std::vector<float> g(dz_e_chw, dz_e_chw + latent_numel);
    enc_relu4_.backward(g.data());
    std::vector<float> g2(latent_numel);
    enc_res2_.backward(g.data(), g2.data());
    enc_relu3_.backward(g2.data());
    enc_res1_.backward(g2.data(), g.data());
    enc_relu2_.backward(g.data());
    std::vector<float> g3(enc_a1_.numel());
    enc2_.backward(g.data(), g3.data());
    enc_relu1_.backward(g3.data());
    enc1_.backward(g3.data(), nullptr);
}

nn::Tensor VQVAE::decode_log_chw(const nn::Tensor &zq_chw) {
    const int hl = cfg_.latent_extent();
    dec_t1_.forward(zq_chw.data(), hl, hl, &dec_a1_);
    dec_relu1_.forward(dec_a1_.data(), dec_a1_.numel());
    dec_res1_.forward(dec_a1_.data(), hl * 2, hl * 2, &dec_r1_);
    dec_relu2_.forward(dec_r1_.data(), dec_r1_.numel());
    dec_t2_.forward(dec_r1_.data(), hl * 2, hl * 2, &dec_a2_);
    dec_relu3_.forward(dec_a2_.data(), dec_a2_.numel());
    dec_res2_.forward(dec_a2_.data(), cfg_.side, cfg_.side, &dec_r2_);
    dec_relu4_.forward(dec_r2_.data(), dec_r2_.numel());
    dec_out_conv_.forward(dec_r2_.data(), cfg_.side, cfg_.side, &dec_out_);
    return dec_out_;
}

void VQVAE::decoder_backward(const float *dy_log, float *dzq_chw) {
    std::vector<float> g(dec_r2_.numel());
    dec_out_conv_.backward(dy_log, g.data());
    dec_relu4_.backward(g.data());
    std::vector<float> g2(dec_a2_.numel());
    dec_res2_.backward(g.data(), g2.data());
    dec_relu3_.backward(g2.data());
    std::vector<float> g3(dec_r1_.numel());
    dec_t2_.backward(g2.data(), g3.data());
    dec_relu2_.backward(g3.data());
    std::vector<float> g4(dec_a1_.numel());
    dec_res1_.backward(g3.data(), g4.data());
    dec_relu1_.backward(g4.data());
    dec_t1_.backward(g4.data(), dzq_chw);
}

LatentGrid VQVAE::encode(const Image &map_sp) {
    if (map_sp.h != cfg_.side || map_sp.w != cfg_.side || map_sp.c != 3)
        throw std::invalid_argument("encode: input shape mismatch");
    if (!map_sp.all_finite()) throw std::invalid_argument("encode: non-finite input");
    if (!map_sp.all_nonnegative()) throw std::invalid_argument("encode: negative radiance");
    const nn::Tensor z = encode_log_chw(to_log_chw(map_sp));
    const int hl = cfg_.latent_extent();
    LatentGrid out(hl, hl, cfg_.d);
    for (int c = 0; c < cfg_.d; ++c)
        for (int y = 0; y < hl; ++y)
            for (int x = 0; x < hl; ++x)
                out.cell(y, x)[c] = z.v[(static_cast<size_t>(c) * hl + y) * hl + x];
    return out;
}

Image VQVAE::decode(const LatentGrid &z_q) {
    check_latent(z_q, cfg_, "decode");
    const int hl = cfg_.latent_extent();
    nn::Tensor zq_chw({cfg_.d, hl, hl});
    for (int c = 0; c < cfg_.d; ++c)
        for (int y = 0; y < hl; ++y)
            for (int x = 0; x < hl; ++x)
                zq_chw.v[(static_cast<size_t>(c) * hl + y) * hl + x] = z_q.cell(y, x)[c];
    const nn::Tensor y_log = decode_log_chw(zq_chw);
    Image out(cfg_.side, cfg_.side, 3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < cfg_.side; ++y)
            for (int x = 0; x < cfg_.side; ++x) {
                const float v =
                    std::expm1(y_log.v[(static_cast<size_t>(c) * cfg_.side + y) * cfg_.side + x]);
                out.at(y, x, c) = v > 0.0f ? v : 0.0f;
            }
    return out;
}

std::pair<LatentGrid, std::vector<int>> VQVAE::quantize(const LatentGrid &z_e) const {
    check_latent(z_e, cfg_, "quantize");
    LatentGrid z_q;
    std::vector<int> indices;
    quantize_cells(z_e, codebook_.w.data(), cfg_.k, &z_q, &indices);
    return {std::move(z_q), std::move(indices)};
}

LatentGrid VQVAE::embed_indices(const std::vector<int> &indices) const {
    const int hl = cfg_.latent_extent();
    if (static_cast<int>(indices.size()) != hl * hl)
        throw std::invalid_argument("embed_indices: length mismatch");
    LatentGrid z_q(hl, hl, cfg_.d);
    z_q.quantized = true;
    for (size_t c = 0; c < indices.size(); ++c) {
        const int k = indices[c];
        if (k < 0 || k >= cfg_.k) throw std::invalid_argument("embed_indices: index out of range");
        std::memcpy(z_q.v.data() + c * cfg_.d,
                    codebook_.w.data() + static_cast<size_t>(k) * cfg_.d,
                    sizeof(float) * cfg_.d);
    }
    return z_q;
}

double VQVAE::train_step(const Image &target, const VQVAEStepMask &mask,
                         VQVAELossTerms *terms, std::vector<int> *indices_out) {
    if (target.h != cfg_.side || target.w != cfg_.side || target.c != 3)
        throw std::invalid_argument("train_step: input shape mismatch");
    const nn::Tensor x_log = to_log_chw(target);
    const nn::Tensor z_e_chw = encode_log_chw(x_log);

    const int hl = cfg_.latent_extent();
    const int d = cfg_.d;
    LatentGrid z_e(hl, hl, d);
    for (int c = 0; c < d; ++c)
        for (int y = 0; y < hl; ++y)
            for (int x = 0; x < hl; ++x)
                z_e.cell(y, x)[c] = z_e_chw.v[(static_cast<size_t>(c) * hl + y) * hl + x];

    LatentGrid z_q;
    std::vector<int> indices;
    quantize_cells(z_e, codebook_.w.data(), cfg_.k, &z_q, &indices);
    if (indices_out != nullptr) *indices_out = indices;

    nn::Tensor zq_chw({d, hl, hl});
    for (int c = 0; c < d; ++c)
        for (int y = 0; y < hl; ++y)
            for (int x = 0; x < hl; ++x)
                zq_chw.v[(static_cast<size_t>(c) * hl + y) * hl + x] = z_q.cell(y, x)[c];
    const nn::Tensor y_log = decode_log_chw(zq_chw);

    // Loss values.
    double rec = 0;
    for (size_t i = 0; i < y_log.numel(); ++i) {
        const double diff = static_cast<double>(y_log.v[i]) - x_log.v[i];
        rec += diff * diff;
    }
    rec /= static_cast<double>(y_log.numel());
    double q = 0;
    for (size_t i = 0; i < z_e.v.size(); ++i) {
        const double diff = static_cast<double>(z_e.v[i]) - z_q.v[i];
        q += diff * diff;
    }
    q /= static_cast<double>(z_e.v.size());
    const double beta = cfg_.beta;
    if (terms != nullptr) {
        terms->rec = rec;
        terms->emb = q;
        terms->com = beta * q;
    }

    const size_t latent_numel = z_e.v.size();
    const double latent_scale = 2.0 / static_cast<double>(latent_numel);

    // Reconstruction gradient through the decoder, then straight through the
    // quantizer onto z_e.
    std::vector<float> dzq_chw(latent_numel, 0.0f);
    if (mask.rec) {
        std::vector<float> dy(y_log.numel());
        const double s = 2.0 / static_cast<double>(y_log.numel());
        for (size_t i = 0; i < y_log.numel(); ++i)
            dy[i] = static_cast<float>(s * (static_cast<double>(y_log.v[i]) - x_log.v[i]));
        decoder_backward(dy.data(), dzq_chw.data());
    }

    // dzq back to cell-major for the codebook and encoder paths.
    std::vector<float> dz_q(latent_numel, 0.0f);
    for (int c = 0; c < d; ++c)
        for (int y = 0; y < hl; ++y)
            for (int x = 0; x < hl; ++x)
                dz_q[(static_cast<size_t>(y) * hl + x) * d + c] =
                    dzq_chw[(static_cast<size_t>(c) * hl + y) * hl + x];
    dz_q_debug_ = dz_q;

    // Embedding term reaches only the codebook; assignment is frozen.
    if (mask.emb) {
        for (size_t cell = 0; cell < indices.size(); ++cell) {
            const int k = indices[cell];
            float *grad = codebook_.g.data() + static_cast<size_t>(k) * d;
            const float *zq_cell = z_q.v.data() + cell * d;
            const float *ze_cell = z_e.v.data() + cell * d;
            for (int j = 0; j < d; ++j)
                grad[j] += static_cast<float>(latent_scale * (zq_cell[j] - ze_cell[j]));
        }
    }

    // Encoder gradient: straight-through copy plus the commitment term.
    std::vector<float> dz_e = dz_q;
    if (mask.com) {
        for (size_t i = 0; i < latent_numel; ++i)
            dz_e[i] += static_cast<float>(beta * latent_scale *
                                          (static_cast<double>(z_e.v[i]) - z_q.v[i]));
    }
    dz_e_debug_ = dz_e;
    if (mask.rec || mask.com) {
        std::vector<float> dz_e_chw(latent_numel);
        for (int c = 0; c < d; ++c)
            for (int y = 0; y < hl; ++y)
                for (int x = 0; x < hl; ++x)
                    dz_e_chw[(static_cast<size_t>(c) * hl + y) * hl + x] =
                        dz_e[(static_cast<size_t>(y) * hl + x) * d + c];
        encoder_backward(dz_e_chw.data());
    }

    double loss = 0;
    if (mask.rec) loss += rec;
    if (mask.emb) loss += q;
    if (mask.com) loss += beta * q;
    return loss;
}

VQVAELossTerms VQVAE::eval_terms(const Image &target, std::vector<int> *indices_out) {
    if (target.h != cfg_.side || target.w != cfg_.side || target.c != 3)
        throw std::invalid_argument("eval_terms: input shape mismatch");
    const nn::Tensor x_log = to_log_chw(target);
    const nn::Tensor z_e_chw = encode_log_chw(x_log);

    const int hl = cfg_.latent_extent();
    const int d = cfg_.d;
    LatentGrid z_e(hl, hl, d);
    for (int c = 0; c < d; ++c)
        for (int y = 0; y < hl; ++y)
            for (int x = 0; x < hl; ++x)
                z_e.cell(y, x)[c] = z_e_chw.v[(static_cast<size_t>(c) * hl + y) * hl + x];

    LatentGrid z_q;
    std::vector<int> indices;
    quantize_cells(z_e, codebook_.w.data(), cfg_.k, &z_q, &indices);
    if (indices_out != nullptr) *indices_out = indices;

    nn::Tensor zq_chw({d, hl, hl});
    for (int c = 0; c < d; ++c)
        for (int y = 0; y < hl; ++y)
            for (int x = 0; x < hl; ++x)
                zq_chw.v[(static_cast<size_t>(c) * hl + y) * hl + x] = z_q.cell(y, x)[c];
    const nn::Tensor y_log = decode_log_chw(zq_chw);

    VQVAELossTerms terms;
    for (size_t i = 0; i < y_log.numel(); ++i) {
        const double diff = static_cast<double>(y_log.v[i]) - x_log.v[i];
        terms.rec += diff * diff;
    }
    terms.rec /= static_cast<double>(y_log.numel());
    double q = 0;
    for (size_t i = 0; i < z_e.v.size(); ++i) {
        const double diff = static_cast<double>(z_e.v[i]) - z_q.v[i];
        q += diff * diff;
    }
    q /= static_cast<double>(z_e.v.size());
    terms.emb = q;
    terms.com = cfg_.beta * q;
    return terms;
}

std::vector<float> VQVAE::recon_input_grad(const Image &target) {
    const nn::Tensor x_log = to_log_chw(target);
    if (dec_out_.numel() != x_log.numel())
        throw std::logic_error("recon_input_grad: call decode() first");
    std::vector<float> dy(dec_out_.numel());
    const double s = 2.0 / static_cast<double>(dec_out_.numel());
    for (size_t i = 0; i < dec_out_.numel(); ++i)
        dy[i] = static_cast<float>(s * (static_cast<double>(dec_out_.v[i]) - x_log.v[i]));
    const int hl = cfg_.latent_extent();
    const int d = cfg_.d;
    std::vector<float> dzq_chw(static_cast<size_t>(d) * hl * hl);
    decoder_backward(dy.data(), dzq_chw.data());
    std::vector<float> dz_q(dzq_chw.size());
    for (int c = 0; c < d; ++c)
        for (int y = 0; y < hl; ++y)
            for (int x = 0; x < hl; ++x)
                dz_q[(static_cast<size_t>(y) * hl + x) * d + c] =
                    dzq_chw[(static_cast<size_t>(c) * hl + y) * hl + x];
    return dz_q;
}

double log_rmse(const Image &a, const Image &b) {
    if (a.data.size() != b.data.size())
        throw std::invalid_argument("log_rmse: shape mismatch");
    double acc = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double diff = std::log1p(a.data[i]) - std::log1p(b.data[i]);
        acc += diff * diff;
    }
    return std::sqrt(acc / static_cast<double>(a.data.size()));
}

}  // namespace vqtl

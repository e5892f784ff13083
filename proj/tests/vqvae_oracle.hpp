// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

// Double-precision mirror of the autoencoder used as the gradient oracle.
// It reads the float network's weights and recomputes every loss term with
// direct-loop convolutions in double, so central finite differences on it
// are clean enough to check the float backward pass at 1e-4 relative error.

#pragma once

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "vqtlight/vqvae.hpp"

namespace vqtl::oracle {

struct DConv {
    int in_c = 0, out_c = 0, k = 1, stride = 1, pad = 0;
    bool transposed = false;
    std::vector<double> w, b;  // same layouts as the float layers

    int out_extent(int extent) const {
        return transposed ? (extent - 1) * stride - 2 * pad + k
                          : (extent + 2 * pad - k) / stride + 1;
    }

    std::vector<double> forward(const std::vector<double> &x, int h, int w_in) const {
        const int oh = out_extent(h), ow = out_extent(w_in);
        std::vector<double> y(static_cast<size_t>(out_c) * oh * ow, 0.0);
        if (!transposed) {
            for (int o = 0; o < out_c; ++o)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        double acc = b[o];
                        for (int ci = 0; ci < in_c; ++ci)
                            for (int ky = 0; ky < k; ++ky)
                                for (int kx = 0; kx < k; ++kx) {
                                    const int iy = oy * stride - pad + ky;
                                    const int ix = ox * stride - pad + kx;
                                    if (iy < 0 || iy >= h || ix < 0 || ix >= w_in) continue;
                                    acc += w[(static_cast<size_t>(o) * in_c + ci) * k * k +
                                             ky * k + kx] *
                                           x[(static_cast<size_t>(ci) * h + iy) * w_in + ix];
                                }
                        y[(static_cast<size_t>(o) * oh + oy) * ow + ox] = acc;
                    }
        } else {
            for (int o = 0; o < out_c; ++o)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox)
                        y[(static_cast<size_t>(o) * oh + oy) * ow + ox] = b[o];
            for (int ci = 0; ci < in_c; ++ci)
                for (int iy = 0; iy < h; ++iy)
                    for (int ix = 0; ix < w_in; ++ix) {
                        const double xv = x[(static_cast<size_t>(ci) * h + iy) * w_in + ix];
                        for (int o = 0; o < out_c; ++o)
                            for (int ky = 0; ky < k; ++ky)
                                for (int kx = 0; kx < k; ++kx) {
                                    const int oy = iy * stride - pad + ky;
                                    const int ox = ix * stride - pad + kx;
                                    if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
                                    y[(static_cast<size_t>(o) * oh + oy) * ow + ox] +=
                                        xv * w[(static_cast<size_t>(ci) * out_c + o) * k * k +
                                               ky * k + kx];
                                }
                    }
        }
        return y;
    }
};

/// Activation-sign signature. Central differences are only valid where the
/// function is smooth; a signature mismatch between the two evaluation
/// points means a ReLU kink (or assignment flip) was crossed.
using Sig = std::vector<int>;

inline void drelu(std::vector<double> *v, Sig *sig = nullptr) {
    for (double &x : *v) {
        if (sig != nullptr) sig->push_back(x > 0 ? 1 : 0);
        if (x < 0) x = 0;
    }
}

struct DRes {
    DConv c1, c2;

    std::vector<double> forward(const std::vector<double> &x, int h, int w,
                                Sig *sig = nullptr) const {
        std::vector<double> mid = c1.forward(x, h, w);
        drelu(&mid, sig);
        std::vector<double> y = c2.forward(mid, h, w);
        for (size_t i = 0; i < y.size(); ++i) y[i] += x[i];
        return y;
    }
};

/// Loss terms in double; mirrors VQVAELossTerms.
struct DTerms {
    double rec = 0, emb = 0, com = 0;
};

class DoubleVQVAE {
public:
    /// Snapshot of the float network's weights. The net argument is not
    /// const only because params() is non-const.
    explicit DoubleVQVAE(VQVAE &net) : cfg_(net.config()) {
        auto params = net.params();
        auto take = [&](const std::string &name) -> std::vector<double> {
            for (nn::Param *p : params)
                if (p->name == name) return std::vector<double>(p->w.v.begin(), p->w.v.end());
            throw std::logic_error("oracle: missing param " + name);
        };
        auto conv = [&](const std::string &n, int ic, int oc, int k, int s, int p) {
            DConv c;
            c.in_c = ic;
            c.out_c = oc;
            c.k = k;
            c.stride = s;
            c.pad = p;
            c.w = take(n + ".weight");
            c.b = take(n + ".bias");
            return c;
        };
        auto tconv = [&](const std::string &n, int ic, int oc, int k, int s, int p) {
            DConv c = conv(n, ic, oc, k, s, p);
            c.transposed = true;
            return c;
        };
        const int eh = cfg_.enc_hidden, d = cfg_.d, dh = cfg_.dec_hidden;
        enc1_ = conv("enc1", 3, eh, 4, 2, 1);
        enc2_ = conv("enc2", eh, d, 4, 2, 1);
        enc_r1_ = {conv("enc_res1.conv1", d, d, 3, 1, 1), conv("enc_res1.conv2", d, d, 3, 1, 1)};
        enc_r2_ = {conv("enc_res2.conv1", d, d, 3, 1, 1), conv("enc_res2.conv2", d, d, 3, 1, 1)};
        codebook_ = take("codebook");
        dec_t1_ = tconv("dec_t1", d, eh, 4, 2, 1);
        dec_r1_ = {conv("dec_res1.conv1", eh, eh, 3, 1, 1),
                   conv("dec_res1.conv2", eh, eh, 3, 1, 1)};
        dec_t2_ = tconv("dec_t2", eh, dh, 4, 2, 1);
        dec_r2_ = {conv("dec_res2.conv1", dh, dh, 3, 1, 1),
                   conv("dec_res2.conv2", dh, dh, 3, 1, 1)};
        dec_out_ = conv("dec_out", dh, 3, 1, 1, 0);
    }

    /// Mutable view of a named weight vector (for finite-difference nudges).
    std::vector<double> *weights(const std::string &name) {
        if (name == "enc1.weight") return &enc1_.w;
        if (name == "enc1.bias") return &enc1_.b;
        if (name == "enc2.weight") return &enc2_.w;
        if (name == "enc2.bias") return &enc2_.b;
        if (name == "enc_res1.conv1.weight") return &enc_r1_.c1.w;
        if (name == "enc_res1.conv1.bias") return &enc_r1_.c1.b;
        if (name == "enc_res1.conv2.weight") return &enc_r1_.c2.w;
        if (name == "enc_res1.conv2.bias") return &enc_r1_.c2.b;
        if (name == "enc_res2.conv1.weight") return &enc_r2_.c1.w;
        if (name == "enc_res2.conv1.bias") return &enc_r2_.c1.b;
        if (name == "enc_res2.conv2.weight") return &enc_r2_.c2.w;
        if (name == "enc_res2.conv2.bias") return &enc_r2_.c2.b;
        if (name == "codebook") return &codebook_;
        if (name == "dec_t1.weight") return &dec_t1_.w;
        if (name == "dec_t1.bias") return &dec_t1_.b;
        if (name == "dec_res1.conv1.weight") return &dec_r1_.c1.w;
        if (name == "dec_res1.conv1.bias") return &dec_r1_.c1.b;
        if (name == "dec_res1.conv2.weight") return &dec_r1_.c2.w;
        if (name == "dec_res1.conv2.bias") return &dec_r1_.c2.b;
        if (name == "dec_t2.weight") return &dec_t2_.w;
        if (name == "dec_t2.bias") return &dec_t2_.b;
        if (name == "dec_res2.conv1.weight") return &dec_r2_.c1.w;
        if (name == "dec_res2.conv1.bias") return &dec_r2_.c1.b;
        if (name == "dec_res2.conv2.weight") return &dec_r2_.c2.w;
        if (name == "dec_res2.conv2.bias") return &dec_r2_.c2.b;
        if (name == "dec_out.weight") return &dec_out_.w;
        if (name == "dec_out.bias") return &dec_out_.b;
        return nullptr;
    }

    std::vector<double> to_log_chw(const Image &img) const {
        const int s = cfg_.side;
        std::vector<double> t(static_cast<size_t>(3) * s * s);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x)
                    t[(static_cast<size_t>(c) * s + y) * s + x] =
                        std::log1p(static_cast<double>(img.at(y, x, c)));
        return t;
    }

    std::vector<double> encode(const std::vector<double> &x_log, Sig *sig = nullptr) const {
        const int s = cfg_.side, hl = cfg_.latent_extent();
        std::vector<double> a = enc1_.forward(x_log, s, s);
        drelu(&a, sig);
        a = enc2_.forward(a, s / 2, s / 2);
        drelu(&a, sig);
        a = enc_r1_.forward(a, hl, hl, sig);
        drelu(&a, sig);
        a = enc_r2_.forward(a, hl, hl, sig);
        drelu(&a, sig);
        return a;  // CHW
    }

    std::vector<double> decode(const std::vector<double> &zq_chw, Sig *sig = nullptr) const {
        const int hl = cfg_.latent_extent();
        std::vector<double> a = dec_t1_.forward(zq_chw, hl, hl);
        drelu(&a, sig);
        a = dec_r1_.forward(a, hl * 2, hl * 2, sig);
        drelu(&a, sig);
        a = dec_t2_.forward(a, hl * 2, hl * 2);
        drelu(&a, sig);
        a = dec_r2_.forward(a, cfg_.side, cfg_.side, sig);
        drelu(&a, sig);
        return dec_out_.forward(a, cfg_.side, cfg_.side);
    }

    /// Nearest codebook entry per cell on a CHW latent; ties take the
    /// lowest index. Returns the quantized latent in CHW.
    std::vector<double> quantize_chw(const std::vector<double> &ze_chw,
                                     std::vector<int> *indices = nullptr) const {
        const int hl = cfg_.latent_extent(), d = cfg_.d;
        std::vector<double> zq(ze_chw.size());
        if (indices != nullptr) indices->assign(static_cast<size_t>(hl) * hl, 0);
        for (int y = 0; y < hl; ++y)
            for (int x = 0; x < hl; ++x) {
                int best = 0;
                double best_dist = 0;
                for (int e = 0; e < cfg_.k; ++e) {
                    double dist = 0;
                    for (int j = 0; j < d; ++j) {
                        const double diff =
                            ze_chw[(static_cast<size_t>(j) * hl + y) * hl + x] -
                            codebook_[static_cast<size_t>(e) * d + j];
                        dist += diff * diff;
                    }
                    if (e == 0 || dist < best_dist) {
                        best_dist = dist;
                        best = e;
                    }
                }
                if (indices != nullptr) (*indices)[static_cast<size_t>(y) * hl + x] = best;
                for (int j = 0; j < d; ++j)
                    zq[(static_cast<size_t>(j) * hl + y) * hl + x] =
                        codebook_[static_cast<size_t>(best) * d + j];
            }
        return zq;
    }

    /// Loss terms with full re-quantization (the true Eq.-style objective).
    DTerms terms(const Image &target) const {
        const std::vector<double> x_log = to_log_chw(target);
        const std::vector<double> z_e = encode(x_log);
        const std::vector<double> z_q = quantize_chw(z_e);
        return finish_terms(x_log, z_e, z_q);
    }

    /// Reconstruction term with the quantizer replaced by adding a frozen
    /// offset captured at the base point: decoder input = z_e + offset.
    /// Differentiating this in the encoder weights is exactly what the
    /// straight-through estimator claims the gradient to be.
    double rec_with_frozen_offset(const Image &target, const std::vector<double> &offset_chw,
                                  Sig *sig = nullptr) const {
        const std::vector<double> x_log = to_log_chw(target);
        std::vector<double> z_in = encode(x_log, sig);
        for (size_t i = 0; i < z_in.size(); ++i) z_in[i] += offset_chw[i];
        const std::vector<double> y_log = decode(z_in, sig);
        return rec_term(x_log, y_log);
    }

    /// Reconstruction term from a fixed quantized latent (decoder-side FD).
    double rec_from_zq(const std::vector<double> &x_log, const std::vector<double> &zq_chw,
                       Sig *sig = nullptr) const {
        return rec_term(x_log, decode(zq_chw, sig));
    }

    /// Shared embedding/commitment quantity: mean squared latent residual
    /// after re-quantization. The signature records the assignments.
    double q_term_requantized(const Image &target, Sig *sig = nullptr) const {
        const std::vector<double> x_log = to_log_chw(target);
        const std::vector<double> z_e = encode(x_log, sig);
        return q_from_ze(z_e, sig);
    }

    /// Same, with the encoder output fixed (codebook-side FD).
    double q_from_ze(const std::vector<double> &z_e, Sig *sig = nullptr) const {
        std::vector<int> indices;
        const std::vector<double> z_q = quantize_chw(z_e, &indices);
        if (sig != nullptr) sig->insert(sig->end(), indices.begin(), indices.end());
        double q = 0;
        for (size_t i = 0; i < z_e.size(); ++i) {
            const double diff = z_e[i] - z_q[i];
            q += diff * diff;
        }
        return q / static_cast<double>(z_e.size());
    }

    static double rec_term(const std::vector<double> &x_log, const std::vector<double> &y_log) {
        double rec = 0;
        for (size_t i = 0; i < y_log.size(); ++i) {
            const double diff = y_log[i] - x_log[i];
            rec += diff * diff;
        }
        return rec / static_cast<double>(y_log.size());
    }

    const VQVAEConfig &config() const { return cfg_; }

private:
    DTerms finish_terms(const std::vector<double> &x_log, const std::vector<double> &z_e,
                        const std::vector<double> &z_q) const {
        DTerms t;
        const std::vector<double> y_log = decode(z_q);
        for (size_t i = 0; i < y_log.size(); ++i) {
            const double diff = y_log[i] - x_log[i];
            t.rec += diff * diff;
        }
        t.rec /= static_cast<double>(y_log.size());
        double q = 0;
        for (size_t i = 0; i < z_e.size(); ++i) {
            const double diff = z_e[i] - z_q[i];
            q += diff * diff;
        }
        q /= static_cast<double>(z_e.size());
        t.emb = q;
        t.com = cfg_.beta * q;
        return t;
    }

    VQVAEConfig cfg_;
    DConv enc1_, enc2_;
    DRes enc_r1_, enc_r2_;
    std::vector<double> codebook_;
    DConv dec_t1_, dec_t2_;
    DRes dec_r1_, dec_r2_;
    DConv dec_out_;
};

}  // namespace vqtl::oracle

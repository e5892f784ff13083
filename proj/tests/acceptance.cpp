// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

// Acceptance harness. Runs the full property suite at desk scale and prints
// one verdict line per criterion (A1..A13). Exit status is the number of
// failed criteria, so a clean run exits 0.

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "vqtlight/checkpoint.hpp"
#include "vqtlight/dataset.hpp"
#include "vqtlight/evalkit.hpp"
#include "vqtlight/inference.hpp"
#include "vqtlight/projection.hpp"
#include "vqtlight/training.hpp"
#include "vqtlight/vit.hpp"
#include "vqtlight/vqvae.hpp"

#include "vqvae_oracle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vqtl;

namespace {

constexpr double kPi = 3.14159265358979323846;

int g_failed = 0;

std::string fmt(const char *pattern, ...) {
    char buf[512];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof buf, pattern, args);
    va_end(args);
    return buf;
}

void report(const char *id, bool pass, const std::string &detail) {
    std::printf("%-4s %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failed;
}

/// Collects the first failure inside a criterion body.
struct Checker {
    bool ok = true;
    std::string why;
    void expect(bool cond, const std::string &msg) {
        if (!cond && ok) {
            ok = false;
            why = msg;
        }
    }
};

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

template <class F>
void criterion(const char *id, F body) {
    try {
        body();
    } catch (const std::exception &e) {
        report(id, false, std::string("unhandled exception: ") + e.what());
    }
}

// -- shared small helpers -----------------------------------------------------

Vec3 texel_dir(int iy, int ix, int h, int w) {
    const double lambda = (ix + 0.5) / w * 2.0 * kPi;
    const double phi = (0.5 - (iy + 0.5) / h) * kPi;
    return {std::cos(phi) * std::cos(lambda), std::cos(phi) * std::sin(lambda),
            std::sin(phi)};
}

// Band-limited analytic environment; smooth over any realistic lobe width.
Image smooth_env(int h) {
    Image env(h, 2 * h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < 2 * h; ++x) {
            const Vec3 d = texel_dir(y, x, h, 2 * h);
            const double lobe = std::pow(std::max(0.0, 0.6 * d.z + 0.8 * d.x), 8.0);
            env.at(y, x, 0) = static_cast<float>(0.5 + 0.4 * d.x + 0.3 * d.z * d.z + 2.0 * lobe);
            env.at(y, x, 1) = static_cast<float>(0.45 + 0.35 * d.y + 0.2 * d.x * d.z + 1.5 * lobe);
            env.at(y, x, 2) = static_cast<float>(0.55 - 0.3 * d.x + 0.25 * d.y * d.y + 1.0 * lobe);
        }
    return env;
}

// Low-order directional fields only, so side-128 bilinear taps resolve them.
Image smooth_panorama(uint64_t variant, int h) {
    Image img(h, 2 * h, 3);
    const double a = 0.5 + 0.2 * static_cast<double>(variant % 3);
    for (int row = 0; row < h; ++row)
        for (int col = 0; col < 2 * h; ++col) {
            const Vec3 d = ep_pixel_dir(row, col, h, 2 * h);
            img.at(row, col, 0) = static_cast<float>(1.5 + a * d.z + 0.3 * d.x);
            img.at(row, col, 1) = static_cast<float>(1.2 + 0.5 * d.x * d.y + a * 0.4 * d.y);
            img.at(row, col, 2) = static_cast<float>(1.0 + 0.4 * d.y * d.z - a * 0.5 * d.z);
        }
    return img;
}

double rel_rmse(const Image &a, const Image &b) {
    double num = 0, den = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        num += d * d;
        den += static_cast<double>(a.data[i]) * a.data[i];
    }
    return std::sqrt(num / den);
}

VQVAEConfig mini_vq_config() {
    VQVAEConfig cfg;
    cfg.side = 16;
    cfg.k = 8;
    cfg.d = 8;
    cfg.enc_hidden = 8;
    cfg.dec_hidden = 8;
    return cfg;
}

Image random_radiance(Rng &rng, int side) {
    Image img(side, side, 3);
    for (float &v : img.data) v = static_cast<float>(rng.uniform(0.0, 6.0));
    return img;
}

const nn::Tensor *param_grad(VQVAE &net, const std::string &name) {
    for (nn::Param *p : net.params())
        if (p->name == name) return &p->g;
    return nullptr;
}

void zero_grads(VQVAE &net) {
    for (nn::Param *p : net.params()) p->g.zero();
}

constexpr double kFdEps = 1e-5;

// Central difference with a smoothness certificate: both evaluation points
// must agree on every activation sign and assignment, or the coordinate sits
// on a kink and the quotient is meaningless.
template <class Eval>
bool guarded_fd(std::vector<double> *w, size_t idx, const Eval &eval, double *fd_out) {
    const double saved = (*w)[idx];
    oracle::Sig sig_up, sig_dn;
    (*w)[idx] = saved + kFdEps;
    const double up = eval(&sig_up);
    (*w)[idx] = saved - kFdEps;
    const double dn = eval(&sig_dn);
    (*w)[idx] = saved;
    if (sig_up != sig_dn) return false;
    *fd_out = (up - dn) / (2 * kFdEps);
    return true;
}

const std::vector<std::string> kEncoderParams = {
    "enc1.weight",          "enc1.bias",          "enc2.weight",          "enc2.bias",
    "enc_res1.conv1.weight", "enc_res1.conv1.bias", "enc_res1.conv2.weight",
    "enc_res1.conv2.bias",  "enc_res2.conv1.weight", "enc_res2.conv1.bias",
    "enc_res2.conv2.weight", "enc_res2.conv2.bias"};

const std::vector<std::string> kDecoderParams = {
    "dec_t1.weight",        "dec_t1.bias",        "dec_res1.conv1.weight",
    "dec_res1.conv1.bias",  "dec_res1.conv2.weight", "dec_res1.conv2.bias",
    "dec_t2.weight",        "dec_t2.bias",        "dec_res2.conv1.weight",
    "dec_res2.conv1.bias",  "dec_res2.conv2.weight", "dec_res2.conv2.bias",
    "dec_out.weight",       "dec_out.bias"};

std::vector<std::pair<std::string, size_t>> sample_coords(
    VQVAE &net, const std::vector<std::string> &names, int per_param, Rng &rng) {
    std::vector<std::pair<std::string, size_t>> coords;
    for (const std::string &name : names) {
        size_t numel = 0;
        for (nn::Param *p : net.params())
            if (p->name == name) numel = p->w.numel();
        for (int i = 0; i < per_param; ++i)
            coords.emplace_back(name,
                                static_cast<size_t>(rng.uniform_int(
                                    0, static_cast<int>(numel) - 1)));
    }
    return coords;
}

// -- metric oracles ---------------------------------------------------------

double rmse_oracle(const Image &a, const Image &b) {
    double acc = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.data.size()));
}

double ssim_oracle(const Image &a, const Image &b) {
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0;
    size_t count = 0;
    for (int ch = 0; ch < a.c; ++ch)
        for (int y = 0; y < a.h; ++y)
            for (int x = 0; x < a.w; ++x) {
                double wsum = 0, ma = 0, mb = 0;
                for (int dy = -5; dy <= 5; ++dy)
                    for (int dx = -5; dx <= 5; ++dx) {
                        const int yy = y + dy, xx = x + dx;
                        if (yy < 0 || yy >= a.h || xx < 0 || xx >= a.w) continue;
                        const double w = std::exp(-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5));
                        wsum += w;
                        ma += w * a.at(yy, xx, ch);
                        mb += w * b.at(yy, xx, ch);
                    }
                ma /= wsum;
                mb /= wsum;
                double va = 0, vb = 0, cov = 0;
                for (int dy = -5; dy <= 5; ++dy)
                    for (int dx = -5; dx <= 5; ++dx) {
                        const int yy = y + dy, xx = x + dx;
                        if (yy < 0 || yy >= a.h || xx < 0 || xx >= a.w) continue;
                        const double w =
                            std::exp(-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5)) / wsum;
                        const double da = a.at(yy, xx, ch) - ma;
                        const double db = b.at(yy, xx, ch) - mb;
                        va += w * da * da;
                        vb += w * db * db;
                        cov += w * da * db;
                    }
                total += (2.0 * ma * mb + c1) * (2.0 * cov + c2) /
                         ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
    return total / static_cast<double>(count);
}

double angular_oracle(const Image &a, const Image &b) {
    double acc = 0;
    size_t count = 0;
    for (int y = 0; y < a.h; ++y)
        for (int x = 0; x < a.w; ++x) {
            double na = 0, nb = 0, dot = 0;
            for (int c = 0; c < 3; ++c) {
                const double va = a.at(y, x, c), vb = b.at(y, x, c);
                na += va * va;
                nb += vb * vb;
                dot += va * vb;
            }
            na = std::sqrt(na);
            nb = std::sqrt(nb);
            if (na < 1e-6 && nb < 1e-6) continue;
            ++count;
            if (na < 1e-6 || nb < 1e-6) {
                acc += 90.0;
                continue;
            }
            acc += std::acos(std::clamp(dot / (na * nb), -1.0, 1.0)) * 180.0 / kPi;
        }
    return count == 0 ? 0.0 : acc / static_cast<double>(count);
}

// -- shared training artifacts (A3 -> A4 -> A5 -> A13) ----------------------

struct Pipeline {
    fs::path dir;
    std::vector<Image> panos;            // EP ground truth, 128 x 256
    std::vector<Image> sp;               // square maps, 128 x 128
    std::vector<CropImage> crops;        // one training crop per panorama
    std::vector<std::vector<int>> labels;
    std::unique_ptr<VQVAE> vq;
    std::unique_ptr<ViT> vit;
    TrainReport rep1, rep2;
    bool stage1_done = false;
    bool stage2_done = false;
};

// -- criteria ----------------------------------------------------------------

void a2_quantization_oracle() {
    const double t0 = now_seconds();
    Rng rng(2024);
    long cells = 0, mismatches = 0;
    for (int k : {4, 64, 128}) {
        VQVAEConfig cfg;
        cfg.side = 32;
        cfg.k = k;
        cfg.d = 12;
        cfg.enc_hidden = 8;
        cfg.dec_hidden = 8;
        VQVAE net(cfg);
        net.init(rng);
        for (int trial = 0; trial < 100; ++trial) {
            float *book = net.codebook().w.data();
            for (size_t i = 0; i < net.codebook().w.numel(); ++i)
                book[i] = static_cast<float>(rng.normal() * 2.0);
            LatentGrid z(8, 8, cfg.d);
            for (float &v : z.v) v = static_cast<float>(rng.normal() * 2.0);

            const std::vector<int> got = net.quantize(z).second;
            for (int cell = 0; cell < 64; ++cell) {
                const float *vec = z.cell(cell / 8, cell % 8);
                int best = 0;
                double best_dist = 0;
                for (int e = 0; e < k; ++e) {
                    double dist = 0;
                    for (int j = 0; j < cfg.d; ++j) {
                        const double diff =
                            static_cast<double>(vec[j]) -
                            book[static_cast<size_t>(e) * cfg.d + j];
                        dist += diff * diff;
                    }
                    if (e == 0 || dist < best_dist) {
                        best_dist = dist;
                        best = e;
                    }
                }
                ++cells;
                if (got[static_cast<size_t>(cell)] != best) ++mismatches;
            }
        }
    }
    const double wall = now_seconds() - t0;
    const bool pass = mismatches == 0 && wall < 10.0;
    report("A2", pass,
           fmt("%ld cells across K in {4,64,128} vs exhaustive search: %ld mismatches, "
               "%.1f s (caps: 0, 10 s)",
               cells, mismatches, wall));
}

void a3_tiny_overfit_reconstruction(Pipeline &p) {
    const double t0 = now_seconds();
    const SphereMapping mapping = build_mapping(128);
    for (int i = 0; i < 8; ++i) {
        p.panos.push_back(synth_panorama(1000 + static_cast<uint64_t>(i)));
        p.sp.push_back(ep_to_sp(p.panos.back(), mapping));
    }

    TrainConfig c1 = TrainConfig::vqvae_defaults();
    c1.epochs = 200;
    c1.batch_size = 2;
    c1.lr = 5e-4;
    c1.schedule.gamma = 0.99;
    c1.seed = 42;
    c1.target_rec = 0.004;
    c1.max_seconds = 1500;
    c1.out_dir = p.dir.string();

    p.vq = std::make_unique<VQVAE>(c1.vqvae_config());
    p.rep1 = train_vqvae(p.sp, {}, c1, p.vq.get());
    p.stage1_done = true;
    const double wall = now_seconds() - t0;

    int used = 0;
    for (int64_t n : p.rep1.codebook_usage) used += n > 0 ? 1 : 0;

    const bool pass =
        p.rep1.final_rec <= 0.01 && p.rep1.epochs_run <= 200 && wall <= 1800.0;
    report("A3", pass,
           fmt("8 panoramas, side 128: log-space rec MSE %.5f after %d epochs, "
               "%d/128 codebook entries used, %.0f s (caps: 0.01, 200, 1800 s)",
               p.rep1.final_rec, p.rep1.epochs_run, used, wall));
}

void a4_tiny_overfit_classification(Pipeline &p) {
    if (!p.stage1_done) {
        report("A4", false, "stage 1 artifacts missing");
        return;
    }
    const double t0 = now_seconds();
    p.labels = compute_labels(p.sp, p.vq.get());
    for (int i = 0; i < 8; ++i)
        p.crops.push_back(crop_fov(p.panos[static_cast<size_t>(i)],
                                   2.0 * kPi * i / 8.0, 0.1, 60.0 * kPi / 180.0, 256));

    TrainConfig c2 = TrainConfig::vit_defaults();
    c2.epochs = 300;
    c2.batch_size = 2;
    c2.lr = 5e-4;
    c2.schedule.kind = "exponential";
    c2.schedule.gamma = 1.0;
    c2.seed = 43;
    c2.target_accuracy = 0.995;
    c2.max_seconds = 2400;
    c2.out_dir = p.dir.string();

    p.vit = std::make_unique<ViT>(c2.vit_config());
    p.rep2 = train_vit(p.crops, p.labels, {}, {}, c2, p.vit.get());
    p.stage2_done = true;
    const double wall = now_seconds() - t0;

    const double ln_k = std::log(128.0);
    const bool init_ok = std::abs(p.rep2.initial_loss - ln_k) <= 0.10 * ln_k;
    const bool pass = p.rep2.token_accuracy >= 0.99 && init_ok &&
                      p.rep2.epochs_run <= 300 && wall <= 2700.0;
    report("A4", pass,
           fmt("token top-1 %.4f after %d epochs, initial loss %.3f vs ln(128)=%.3f, "
               "%.0f s (caps: >=0.99, 300, within 10%%, 2700 s)",
               p.rep2.token_accuracy, p.rep2.epochs_run, p.rep2.initial_loss, ln_k,
               wall));
}

void a5_end_to_end_consistency(Pipeline &p) {
    if (!p.stage2_done) {
        report("A5", false, "stage 2 artifacts missing");
        return;
    }
    EstimatorBundle bundle = load_bundle((p.dir / "vit_last.ckpt").string(),
                                         (p.dir / "vqvae_last.ckpt").string());

    double worst = 0;
    for (size_t i = 0; i < p.crops.size(); ++i) {
        const Image pred = estimate_lighting(p.crops[i].pixels, bundle);
        worst = std::max(worst, log_rmse(pred, p.panos[i]));
    }

    // Ground-truth indices must reproduce the decoder path bit for bit.
    bool bitwise = true;
    const SphereMapping mapping = build_mapping(128);
    for (size_t i = 0; i < p.labels.size() && bitwise; ++i) {
        const Image via_bundle = decode_indices(p.labels[i], bundle);
        const Image via_decoder =
            sp_to_ep(p.vq->decode(p.vq->embed_indices(p.labels[i])), mapping, 128);
        bitwise = via_bundle.h == via_decoder.h && via_bundle.w == via_decoder.w &&
                  std::memcmp(via_bundle.data.data(), via_decoder.data.data(),
                              via_bundle.data.size() * sizeof(float)) == 0;
    }

    const bool pass = worst <= 0.1 && bitwise;
    report("A5", pass,
           fmt("worst training-crop log-space RMSE %.4f (cap 0.1); ground-truth-index "
               "output bit-identical to the decoder path: %s",
               worst, bitwise ? "yes" : "NO"));
}

void a6_gradient_check() {
    Rng rng(13);
    VQVAE net(mini_vq_config());
    net.init(rng);
    const Image img = random_radiance(rng, 16);

    Checker c;
    double max_rel = 0;
    int checked = 0, skipped = 0;

    auto compare = [&](double fd, double an) {
        const double scale = std::max(std::abs(fd), std::abs(an));
        if (scale <= 1e-9) {
            c.expect(std::abs(fd - an) <= 1e-9, fmt("tiny-gradient gap %g", fd - an));
        } else {
            max_rel = std::max(max_rel, std::abs(fd - an) / scale);
        }
    };
    auto all_zero = [&](const std::vector<std::string> &names, const char *what) {
        for (const std::string &name : names)
            for (float g : param_grad(net, name)->v)
                c.expect(g == 0.0f, fmt("%s gradient leaked into %s", what, name.c_str()));
    };

    // Reconstruction term: encoder side differentiates the frozen-offset
    // surrogate (the straight-through definition); decoder side is plain.
    zero_grads(net);
    net.train_step(img, {true, false, false});
    {
        oracle::DoubleVQVAE ora(net);
        const std::vector<double> z_e0 = ora.encode(ora.to_log_chw(img));
        std::vector<double> offset = ora.quantize_chw(z_e0);
        for (size_t i = 0; i < offset.size(); ++i) offset[i] -= z_e0[i];
        Rng pick(101);
        for (const auto &[name, idx] : sample_coords(net, kEncoderParams, 3, pick)) {
            double fd = 0;
            if (!guarded_fd(ora.weights(name), idx,
                            [&](oracle::Sig *s) {
                                return ora.rec_with_frozen_offset(img, offset, s);
                            },
                            &fd)) {
                ++skipped;
                continue;
            }
            ++checked;
            compare(fd, param_grad(net, name)->v[idx]);
        }
        const std::vector<double> x_log = ora.to_log_chw(img);
        const std::vector<double> zq0 = ora.quantize_chw(z_e0);
        for (const auto &[name, idx] : sample_coords(net, kDecoderParams, 3, pick)) {
            double fd = 0;
            if (!guarded_fd(ora.weights(name), idx,
                            [&](oracle::Sig *s) { return ora.rec_from_zq(x_log, zq0, s); },
                            &fd)) {
                ++skipped;
                continue;
            }
            ++checked;
            compare(fd, param_grad(net, name)->v[idx]);
        }
        all_zero({"codebook"}, "reconstruction");
        c.expect(std::memcmp(net.last_dz_e().data(), net.last_dz_q().data(),
                             sizeof(float) * net.last_dz_e().size()) == 0,
                 "latent gradient changed across the quantizer");
    }

    // Embedding term: reaches only the codebook.
    zero_grads(net);
    net.train_step(img, {false, true, false});
    {
        oracle::DoubleVQVAE ora(net);
        const std::vector<double> z_e0 = ora.encode(ora.to_log_chw(img));
        std::vector<double> *cb = ora.weights("codebook");
        const nn::Tensor *cb_grad = param_grad(net, "codebook");
        for (size_t idx = 0; idx < cb->size(); ++idx) {
            double fd = 0;
            if (!guarded_fd(cb, idx,
                            [&](oracle::Sig *s) { return ora.q_from_ze(z_e0, s); }, &fd)) {
                ++skipped;
                continue;
            }
            ++checked;
            compare(fd, cb_grad->v[idx]);
        }
        all_zero(kEncoderParams, "embedding");
        all_zero(kDecoderParams, "embedding");
    }

    // Commitment term: reaches only the encoder, scaled by beta.
    zero_grads(net);
    net.train_step(img, {false, false, true});
    {
        oracle::DoubleVQVAE ora(net);
        const double beta = net.config().beta;
        Rng pick(103);
        for (const auto &[name, idx] : sample_coords(net, kEncoderParams, 3, pick)) {
            double fd = 0;
            if (!guarded_fd(ora.weights(name), idx,
                            [&](oracle::Sig *s) { return ora.q_term_requantized(img, s); },
                            &fd)) {
                ++skipped;
                continue;
            }
            ++checked;
            compare(beta * fd, param_grad(net, name)->v[idx]);
        }
        all_zero({"codebook"}, "commitment");
        all_zero(kDecoderParams, "commitment");
    }

    c.expect(max_rel <= 1e-4, fmt("max relative gradient error %.3e", max_rel));
    c.expect(4 * checked >= 3 * (checked + skipped), "kink certificate rejected too much");

    report("A6", c.ok,
           c.ok ? fmt("side 16, K=8, D=8: %d coordinates vs central differences, max "
                      "relative error %.2e (cap 1e-4); blocked sides all zero",
                      checked, max_rel)
                : c.why);
}

void a7_projection_suite() {
    const double t0 = now_seconds();
    const SphereMapping mapping = build_mapping(128);
    Checker c;

    double sum = 0, w_min = 0, w_max = 0;
    for (size_t i = 0; i < mapping.solid_angles.size(); ++i) {
        const double w = mapping.solid_angles[i];
        sum += w;
        w_min = i == 0 ? w : std::min(w_min, w);
        w_max = i == 0 ? w : std::max(w_max, w);
    }
    const double sum_err = std::abs(sum - 4.0 * kPi) / (4.0 * kPi);
    const double ratio = w_max / w_min;
    c.expect(sum_err <= 1e-3, fmt("solid angle sum off by %.2e", sum_err));
    c.expect(ratio <= 1.01, fmt("area ratio %.4f", ratio));

    double worst_rt = 0, worst_energy = 0;
    for (uint64_t variant = 0; variant < 3; ++variant) {
        const Image pano = smooth_panorama(variant, 128);
        const Image sp = ep_to_sp(pano, mapping);
        const Image back = sp_to_ep(sp, mapping, 128);
        worst_rt = std::max(worst_rt, rel_rmse(pano, back));
        const double e_ep = ep_total_energy(pano);
        const double e_sp = sp_total_energy(sp, mapping);
        worst_energy = std::max(worst_energy, std::abs(e_sp - e_ep) / e_ep);
    }
    c.expect(worst_rt <= 0.05, fmt("round-trip rel RMSE %.4f", worst_rt));
    c.expect(worst_energy <= 0.02, fmt("energy drift %.4f", worst_energy));

    const double wall = now_seconds() - t0;
    c.expect(wall < 60.0, fmt("runtime %.1f s", wall));

    report("A7", c.ok,
           c.ok ? fmt("solid angles sum 4pi+/-%.2e, ratio %.5f, round trip %.4f, "
                      "energy %.4f, %.1f s (caps: 1e-3, 1.01, 0.05, 0.02, 60 s)",
                      sum_err, ratio, worst_rt, worst_energy, wall)
                : c.why);
}

void a8_cross_entropy_fixed_points() {
    Checker c;
    double worst_uniform = 0;
    for (int k : {3, 128}) {
        nn::Tensor logits({5, k});
        for (float &v : logits.v) v = 0.7f;
        std::vector<int> labels(5);
        for (int i = 0; i < 5; ++i) labels[static_cast<size_t>(i)] = i % k;
        const double gap = std::abs(vit_loss(logits, labels) - std::log(double(k)));
        worst_uniform = std::max(worst_uniform, gap);
        c.expect(gap <= 1e-6, fmt("uniform K=%d off by %.2e", k, gap));
    }

    nn::Tensor sat({4, 16});
    for (float &v : sat.v) v = 0.0f;
    std::vector<int> sat_labels{3, 7, 0, 15};
    for (int r = 0; r < 4; ++r)
        sat.v[static_cast<size_t>(r) * 16 + static_cast<size_t>(sat_labels[r])] = 40.0f;
    const double sat_loss = vit_loss(sat, sat_labels);
    c.expect(sat_loss <= 1e-9, fmt("saturated loss %.2e", sat_loss));

    report("A8", c.ok,
           c.ok ? fmt("uniform logits within %.1e of ln(K) for K in {3,128}; saturated "
                      "loss %.1e (caps: 1e-6, 1e-9)",
                      worst_uniform, sat_loss)
                : c.why);
}

void a9_renderer_oracles() {
    Checker c;

    // Constant environment: irradiance is exactly pi times the color.
    Image env(64, 128, 3);
    const float color[3] = {0.7f, 0.5f, 0.3f};
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 128; ++x)
            for (int ch = 0; ch < 3; ++ch) env.at(y, x, ch) = color[ch];
    double worst_irr = 0;
    const Vec3 normals[3] = {{0, 0, 1}, {1, 0, 0}, {-0.6, 0.64, 0.48}};
    for (const Vec3 &n : normals) {
        const auto irr = diffuse_irradiance(env, n, ibl_quadrature());
        for (int ch = 0; ch < 3; ++ch) {
            const double expected = kPi * color[ch];
            worst_irr = std::max(worst_irr, std::abs(irr[static_cast<size_t>(ch)] - expected) / expected);
        }
    }
    c.expect(worst_irr <= 1e-4, fmt("irradiance off by %.2e", worst_irr));

    // Single-texel light: the mirror highlight lands on the analytic spot.
    const int eh = 128, ew = 256, s = 128;
    Image point_env(eh, ew, 3);
    const int iy = 53, ix = 28;
    for (int ch = 0; ch < 3; ++ch) point_env.at(iy, ix, ch) = 1000.0f;
    const Vec3 light = texel_dir(iy, ix, eh, ew);
    Vec3 n{light.x + 1.0, light.y, light.z};
    const double len = std::sqrt(n.x * n.x + n.y * n.y + n.z * n.z);
    n = {n.x / len, n.y / len, n.z / len};
    const double px = (n.y + 1.0) / 2.0 * s - 0.5;
    const double py = (1.0 - n.z) / 2.0 * s - 0.5;
    SphereRenderSpec mirror_spec;
    mirror_spec.material = Material::kMirror;
    mirror_spec.image_size = s;
    const Image shaded = render_sphere_linear(point_env, mirror_spec);
    int by = -1, bx = -1;
    double best = -1;
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
            const double lum =
                shaded.at(y, x, 0) + shaded.at(y, x, 1) + shaded.at(y, x, 2);
            if (lum > best) {
                best = lum;
                by = y;
                bx = x;
            }
        }
    const double highlight_err =
        std::max(std::abs(bx - px), std::abs(by - py));
    c.expect(best > 0.0, "mirror render is black");
    c.expect(highlight_err <= 1.0, fmt("highlight off by %.2f px", highlight_err));

    // Glossy at exponent 1e4 matches the mirror within 2 LDR levels on a
    // band-limited environment (the limit presumes smooth radiance).
    const Image smooth = smooth_env(128);
    SphereRenderSpec m2;
    m2.material = Material::kMirror;
    m2.image_size = 64;
    SphereRenderSpec g2 = m2;
    g2.material = Material::kGlossy;
    g2.phong_exponent = 1e4;
    const Image m_lin = render_sphere_linear(smooth, m2);
    const Image g_lin = render_sphere_linear(smooth, g2);
    const double exposure = tone_map_exposure(m_lin, {});
    const Image m_ldr = tone_map_fixed(m_lin, exposure, 2.2);
    const Image g_ldr = tone_map_fixed(g_lin, exposure, 2.2);
    double max_diff = 0;
    for (size_t i = 0; i < m_ldr.data.size(); ++i)
        max_diff = std::max(
            max_diff, std::abs(static_cast<double>(m_ldr.data[i]) - g_ldr.data[i]));
    c.expect(max_diff <= 2.0 / 255.0,
             fmt("glossy-mirror gap %.2f LDR levels", max_diff * 255.0));

    report("A9", c.ok,
           c.ok ? fmt("irradiance within %.1e of pi*c; highlight %.2f px from analytic "
                      "spot; glossy@1e4 within %.2f LDR levels of mirror (caps: 1e-4, "
                      "1 px, 2 levels)",
                      worst_irr, highlight_err, max_diff * 255.0)
                : c.why);
}

void a10_metric_oracles() {
    Checker c;
    double worst_rmse = 0, worst_ssim = 0, worst_ang = 0;
    for (uint64_t seed = 50; seed < 55; ++seed) {
        Rng rng(seed);
        Image a(8, 8, 3), b(8, 8, 3);
        for (float &v : a.data) v = static_cast<float>(rng.uniform());
        for (float &v : b.data) v = static_cast<float>(rng.uniform());
        worst_rmse = std::max(worst_rmse, std::abs(rmse(a, b) - rmse_oracle(a, b)));
        worst_ssim = std::max(worst_ssim, std::abs(ssim(a, b) - ssim_oracle(a, b)));
        worst_ang = std::max(worst_ang,
                             std::abs(angular_error_deg(a, b) - angular_oracle(a, b)));
    }
    c.expect(worst_rmse <= 1e-9, fmt("rmse oracle gap %.2e", worst_rmse));
    c.expect(worst_ssim <= 1e-6, fmt("ssim oracle gap %.2e", worst_ssim));
    c.expect(worst_ang <= 1e-6, fmt("angular oracle gap %.2e", worst_ang));

    Rng rng(99);
    Image same(8, 8, 3);
    for (float &v : same.data) v = static_cast<float>(rng.uniform());
    c.expect(rmse(same, same) == 0.0, "identical rmse not 0");
    c.expect(ssim(same, same) == 1.0, "identical ssim not 1");
    c.expect(angular_error_deg(same, same) == 0.0, "identical angular not 0");

    report("A10", c.ok,
           c.ok ? fmt("oracle gaps rmse %.1e, ssim %.1e, angular %.1e deg (caps 1e-9, "
                      "1e-6, 1e-6); identical inputs give (0, 1, 0) exactly",
                      worst_rmse, worst_ssim, worst_ang)
                : c.why);
}

void a11_schedules() {
    Checker c;

    // Stage 1 at its stock schedule on a miniature net; the recorded trace
    // must equal base*gamma^e bitwise for every epoch.
    const SphereMapping mapping = build_mapping(16);
    std::vector<Image> sp;
    for (int i = 0; i < 2; ++i)
        sp.push_back(ep_to_sp(synth_panorama(700 + static_cast<uint64_t>(i), 16, 32), mapping));
    TrainConfig c1 = TrainConfig::vqvae_defaults();
    c1.k = 8;
    c1.latent_side = 4;
    c1.seed = 5;
    VQVAE vq(mini_vq_config());
    const TrainReport r1 = train_vqvae(sp, {}, c1, &vq);
    c.expect(r1.lr_trace.size() == 20, "stage 1 trace length");
    for (size_t e = 0; e < r1.lr_trace.size(); ++e)
        c.expect(r1.lr_trace[e] == 5e-4 * std::pow(0.92, static_cast<double>(e)),
                 fmt("stage 1 lr at epoch %zu", e));
    c.expect(r1.lr_trace.size() > 1 && r1.lr_trace[1] == 4.6e-4, "epoch 1 lr is 4.6e-4");

    // Stage 2 stock multistep schedule: three exact plateaus.
    std::vector<CropImage> crops(2);
    Rng rng(31);
    for (auto &crop : crops) {
        crop.pixels = Image(16, 16, 3);
        for (float &v : crop.pixels.data) v = static_cast<float>(rng.uniform());
    }
    std::vector<std::vector<int>> labels(2, std::vector<int>(16, 2));
    TrainConfig c2 = TrainConfig::vit_defaults();
    c2.k = 8;
    c2.latent_side = 4;
    c2.crop_side = 16;
    c2.seed = 6;
    ViTConfig vit_cfg = c2.vit_config();
    vit_cfg.embed = 32;
    vit_cfg.depth = 1;
    vit_cfg.heads = 2;
    vit_cfg.mlp_dim = 32;
    ViT vit(vit_cfg);
    const TrainReport r2 = train_vit(crops, labels, {}, {}, c2, &vit);
    c.expect(r2.lr_trace.size() == 25, "stage 2 trace length");
    for (size_t e = 0; e < r2.lr_trace.size(); ++e) {
        const double want = e < 15 ? 1e-3 : e < 20 ? 1e-4 : 1e-5;
        c.expect(r2.lr_trace[e] == want, fmt("stage 2 lr at epoch %zu", e));
    }

    report("A11", c.ok,
           c.ok ? "stage 1 trace equals 5e-4*0.92^e bitwise for 20 epochs; stage 2 "
                  "trace equals 1e-3/1e-4/1e-5 plateaus bitwise for 25 epochs"
                : c.why);
}

void a12_ablation_harness(const fs::path &root) {
    const fs::path out = root / "ablate";
    const fs::path log = root / "ablate.log";
    const std::string cmd = std::string("\"") + VQTL_CLI_PATH + "\" ablate --out \"" +
                            out.string() + "\" --seed 7 > \"" + log.string() + "\" 2>&1";
    const double t0 = now_seconds();
    const int rc = std::system(cmd.c_str());
    const double wall = now_seconds() - t0;

    Checker c;
    c.expect(rc == 0, fmt("ablate exited with status %d", rc));

    json rows;
    if (c.ok) {
        std::ifstream in(out / "ablate_report.json");
        c.expect(in.good(), "ablate_report.json missing");
        if (c.ok) {
            const json doc = json::parse(in);
            rows = doc.at("rows");
            c.expect(rows.size() == 5, fmt("expected 5 rows, got %zu", rows.size()));
        }
    }

    size_t params2 = 0, params4 = 0;
    int tokens2 = 0, tokens5 = 0;
    if (c.ok) {
        for (const json &row : rows) {
            const int opt = row.at("option").get<int>();
            if (opt == 2) {
                params2 = row.at("params").get<size_t>();
                tokens2 = row.at("token_seq").get<int>();
            }
            if (opt == 4) params4 = row.at("params").get<size_t>();
            if (opt == 5) tokens5 = row.at("token_seq").get<int>();
            c.expect(row.at("rmse").get<double>() >= 0.0, "negative rmse");
        }
        c.expect(tokens5 > tokens2,
                 fmt("option 5 tokens %d not > option 2 tokens %d", tokens5, tokens2));
        const double rel = std::abs(static_cast<double>(params4) - static_cast<double>(params2)) /
                           static_cast<double>(params2);
        c.expect(rel <= 0.20, fmt("option 4 params off option 2 by %.1f%%", rel * 100));
    }

    report("A12", c.ok,
           c.ok ? fmt("5 options ran in %.0f s; option 5 tokens %d > option 2 tokens %d; "
                      "option 4 params %zu within %.1f%% of option 2 params %zu (cap 20%%)",
                      wall, tokens5, tokens2, params4,
                      std::abs(static_cast<double>(params4) - static_cast<double>(params2)) /
                          static_cast<double>(params2) * 100.0,
                      params2)
                : c.why);
}

void a13_latency_harness(Pipeline &p) {
    if (!p.stage2_done) {
        report("A13", false, "stage 2 artifacts missing");
        return;
    }
    EstimatorBundle bundle = load_bundle((p.dir / "vit_last.ckpt").string(),
                                         (p.dir / "vqvae_last.ckpt").string());
    const LatencyStats stats = time_inference(bundle, p.crops[0].pixels, 3, 100);
    const double ratio = stats.p95 / stats.p50;
    const bool pass = stats.samples.size() == 100 && stats.p50 > 0 && ratio <= 3.0;
    report("A13", pass,
           fmt("100 runs: p50 %.3f s, p95 %.3f s, p95/p50 %.2f (cap 3.0); reference "
               "figure 0.025 s/frame on GPU is context only, not asserted",
               stats.p50, stats.p95, ratio));
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    std::printf("A1   ----  full-scale corpus metrics (RMSE 0.0324, SSIM 0.9880, angular "
                "1.356) need the licensed Laval indoor dataset, GPU-scale training, and "
                "an external renderer; they are not reproduced. The criteria below are "
                "the substitute property suite.\n");

    const fs::path root = fs::temp_directory_path() / "vqtl_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);

    Pipeline p;
    p.dir = root / "pipeline";
    fs::create_directories(p.dir);

    criterion("A2", [] { a2_quantization_oracle(); });
    criterion("A3", [&] { a3_tiny_overfit_reconstruction(p); });
    criterion("A4", [&] { a4_tiny_overfit_classification(p); });
    criterion("A5", [&] { a5_end_to_end_consistency(p); });
    criterion("A6", [] { a6_gradient_check(); });
    criterion("A7", [] { a7_projection_suite(); });
    criterion("A8", [] { a8_cross_entropy_fixed_points(); });
    criterion("A9", [] { a9_renderer_oracles(); });
    criterion("A10", [] { a10_metric_oracles(); });
    criterion("A11", [] { a11_schedules(); });
    criterion("A12", [&] { a12_ablation_harness(root); });
    criterion("A13", [&] { a13_latency_harness(p); });

    if (g_failed == 0) {
        std::printf("all criteria passed\n");
    } else {
        std::printf("%d criteria FAILED\n", g_failed);
    }
    return g_failed;
}

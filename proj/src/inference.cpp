// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#include "vqtlight/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace vqtl {

namespace {

double wall_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

EstimatorBundle load_bundle(const std::string &vit_path, const std::string &vqvae_path) {
    const nlohmann::json vit_hdr = read_checkpoint_header(vit_path);
    const nlohmann::json vq_hdr = read_checkpoint_header(vqvae_path);
    if (vit_hdr.at("kind") != "vit")
        throw std::runtime_error("load_bundle: " + vit_path + " is not a classifier checkpoint");
    if (vq_hdr.at("kind") != "vqvae")
        throw std::runtime_error("load_bundle: " + vqvae_path + " is not a vqvae checkpoint");

    const ViTConfig vit_cfg = vit_config_from_fingerprint(vit_hdr.at("fingerprint"));
    const VQVAEConfig vq_cfg = vqvae_config_from_fingerprint(vq_hdr.at("fingerprint"));
    if (vit_cfg.k != vq_cfg.k)
        throw std::runtime_error("load_bundle: classifier classes (" + std::to_string(vit_cfg.k) +
                                 ") do not match codebook size (" + std::to_string(vq_cfg.k) +
                                 ")");
    if (vit_cfg.n() != vq_cfg.token_count())
        throw std::runtime_error("load_bundle: classifier token count (" +
                                 std::to_string(vit_cfg.n()) +
                                 ") does not match latent cell count (" +
                                 std::to_string(vq_cfg.token_count()) + ")");

    EstimatorBundle b(vit_cfg, vq_cfg);
    b.vit = load_vit(vit_path);
    b.vqvae = load_vqvae(vqvae_path);
    b.vit_fingerprint = vit_hdr.at("fingerprint");
    b.vqvae_fingerprint = vq_hdr.at("fingerprint");
    return b;
}

LatentGrid lookup_embeddings(const std::vector<int> &indices, const VQVAE &vqvae) {
    return vqvae.embed_indices(indices);
}

Image decode_indices(const std::vector<int> &indices, EstimatorBundle &b) {
    const LatentGrid z_q = lookup_embeddings(indices, b.vqvae);
    const Image sp = b.vqvae.decode(z_q);
    if (!sp.all_finite())
        throw std::runtime_error("decode_indices: decoder produced non-finite values");
    Image ep = sp_to_ep(sp, b.mapping, b.mapping.side);
    if (!ep.all_finite())
        throw std::runtime_error("decode_indices: inverse projection produced non-finite values");
    return ep;
}

Image estimate_lighting(const Image &crop, EstimatorBundle &b) {
    const ViTConfig &vc = b.vit.config();
    if (crop.h != vc.image_side || crop.w != vc.image_side || crop.c != 3)
        throw std::invalid_argument("estimate_lighting: crop must be " +
                                    std::to_string(vc.image_side) + "x" +
                                    std::to_string(vc.image_side) + "x3");
    if (!crop.all_finite())
        throw std::invalid_argument("estimate_lighting: crop contains non-finite values");
    const std::vector<int> indices = b.vit.predict(crop);
    return decode_indices(indices, b);
}

std::vector<Image> estimate_lighting_batch(const std::vector<Image> &crops, EstimatorBundle &b) {
    std::vector<Image> out;
    out.reserve(crops.size());
    for (const Image &crop : crops) out.push_back(estimate_lighting(crop, b));
    return out;
}

LatencyStats time_inference(EstimatorBundle &b, const Image &crop, int n_warm, int n_runs) {
    if (n_runs < 10) throw std::invalid_argument("time_inference: need at least 10 runs");
    if (n_warm < 0) throw std::invalid_argument("time_inference: negative warmup count");
    for (int i = 0; i < n_warm; ++i) estimate_lighting(crop, b);

    LatencyStats stats;
    stats.samples.reserve(n_runs);
    for (int i = 0; i < n_runs; ++i) {
        const double t0 = wall_seconds();
        estimate_lighting(crop, b);
        stats.samples.push_back(wall_seconds() - t0);
    }
    double sum = 0;
    for (double s : stats.samples) sum += s;
    stats.mean = sum / n_runs;

    std::vector<double> sorted = stats.samples;
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) {
        // Nearest-rank on the sorted samples.
        const int idx = std::min<int>(n_runs - 1, static_cast<int>(std::ceil(q * n_runs)) - 1);
        return sorted[std::max(idx, 0)];
    };
    stats.p50 = quantile(0.50);
    stats.p95 = quantile(0.95);
    return stats;
}

}  // namespace vqtl

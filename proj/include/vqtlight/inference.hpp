// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "vqtlight/checkpoint.hpp"
#include "vqtlight/projection.hpp"
#include "vqtlight/vit.hpp"
#include "vqtlight/vqvae.hpp"

namespace vqtl {

/// Everything the deployed path needs: classifier, frozen decoder, and the
/// sphere mapping that turns decoded square maps back into panoramas.
/// The bundle owns the networks; calls mutate only their forward caches,
/// never the weights, so one bundle serves one thread at a time.
struct EstimatorBundle {
    ViT vit;
    VQVAE vqvae;
    SphereMapping mapping;
    nlohmann::json vit_fingerprint;
    nlohmann::json vqvae_fingerprint;

    EstimatorBundle(const ViTConfig &vit_cfg, const VQVAEConfig &vq_cfg)
        : vit(vit_cfg), vqvae(vq_cfg), mapping(build_mapping(vq_cfg.side)) {}

    int k() const { return vqvae.config().k; }
};

/// Loads both checkpoints and validates that they belong together: the
/// classifier's class count must equal the codebook size and its token count
/// must equal the latent cell count. Throws std::runtime_error otherwise.
EstimatorBundle load_bundle(const std::string &vit_path, const std::string &vqvae_path);

/// Index sequence -> quantized latent grid, cell n = codebook entry idx[n].
LatentGrid lookup_embeddings(const std::vector<int> &indices, const VQVAE &vqvae);

/// Index sequence -> decoded HDR panorama (EP, height = mapping side). This
/// is the shared tail of both the predicted and the ground-truth-label path.
Image decode_indices(const std::vector<int> &indices, EstimatorBundle &b);

/// Full deployed path: crop -> logits -> indices -> codebook -> decoder ->
/// square map -> panorama. Deterministic; throws on non-finite intermediates.
Image estimate_lighting(const Image &crop, EstimatorBundle &b);

std::vector<Image> estimate_lighting_batch(const std::vector<Image> &crops, EstimatorBundle &b);

struct LatencyStats {
    double mean = 0;
    double p50 = 0;
    double p95 = 0;
    std::vector<double> samples;  // seconds, one per timed run
};

/// Times estimate_lighting on a fixed crop. Warmup runs execute but are not
/// recorded. Requires n_runs >= 10.
LatencyStats time_inference(EstimatorBundle &b, const Image &crop, int n_warm, int n_runs);

}  // namespace vqtl

// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "vqtlight/nn.hpp"
#include "vqtlight/vit.hpp"
#include "vqtlight/vqvae.hpp"

namespace vqtl {

/// Checkpoint container, format version 1:
///   bytes 0..3   magic "VQTC"
///   bytes 4..7   uint32 LE format version
///   bytes 8..11  uint32 LE header length
///   header       UTF-8 JSON {kind, fingerprint, params:[{name, shape}]}
///   payload      float32 LE parameter values in header order
inline constexpr uint32_t kCheckpointVersion = 1;

nlohmann::json vqvae_fingerprint(const VQVAEConfig &cfg);
nlohmann::json vit_fingerprint(const ViTConfig &cfg);
VQVAEConfig vqvae_config_from_fingerprint(const nlohmann::json &fp);
ViTConfig vit_config_from_fingerprint(const nlohmann::json &fp);

void save_checkpoint(const std::string &path, const std::string &kind,
                     const nlohmann::json &fingerprint,
                     const std::vector<nn::Param *> &params);

/// Reads kind and fingerprint without loading weights.
nlohmann::json read_checkpoint_header(const std::string &path);

/// Loads weights into params, which must match the stored names and shapes
/// in order. Throws on magic/version/kind/shape mismatch.
void load_checkpoint(const std::string &path, const std::string &expected_kind,
                     const std::vector<nn::Param *> &params);

/// Convenience: reconstruct a model from a checkpoint alone.
VQVAE load_vqvae(const std::string &path);
ViT load_vit(const std::string &path);

}  // namespace vqtl

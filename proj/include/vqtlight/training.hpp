// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vqtlight/dataset.hpp"
#include "vqtlight/vit.hpp"
#include "vqtlight/vqvae.hpp"

namespace vqtl {

enum class Stage { kVqvae, kVit };

const char *stage_name(Stage s);
Stage stage_from_name(const std::string &name);

struct ScheduleConfig {
    std::string kind = "exponential";  // "exponential" | "multistep"
    double gamma = 0.92;
    std::vector<int> milestones;       // multistep only
};

/// Learning rate at an epoch. Pure functions of the epoch index.
double exponential_lr(double base, double gamma, int epoch);
double multistep_lr(double base, const std::vector<int> &milestones, double gamma, int epoch);

struct TrainConfig {
    Stage stage = Stage::kVqvae;
    int epochs = 20;
    int batch_size = 16;
    double lr = 5e-4;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ScheduleConfig schedule;
    uint64_t seed = 0;

    // Variant flags.
    int k = 128;
    int latent_side = 32;           // feature resolution (latent cells per axis)
    bool cnn_backbone = false;
    bool extra_class_tokens = false;
    int crop_side = 256;

    // Plumbing. target_* <= 0 disables early stopping; max_seconds <= 0
    // disables the wall-clock guard.
    double target_rec = -1.0;       // stage 1: stop when eval rec loss reaches this
    double target_accuracy = -1.0;  // stage 2: stop when token accuracy reaches this
    double max_seconds = -1.0;
    std::string out_dir;

    int pano_side() const { return 4 * latent_side; }
    int vit_patch() const { return crop_side / latent_side; }
    double lr_at(int epoch) const;

    VQVAEConfig vqvae_config() const;
    ViTConfig vit_config() const;

    static TrainConfig vqvae_defaults();
    static TrainConfig vit_defaults();

    std::string to_json() const;
    static TrainConfig from_json(const std::string &text);
    void save(const std::string &path) const;
    static TrainConfig load(const std::string &path);
};

struct EpochRow {
    int epoch = 0;
    double loss = 0;      // mean masked loss over samples
    double rec = 0;       // stage 1: mean reconstruction term
    double accuracy = -1; // stage 2: token accuracy when measured, else -1
    double lr = 0;
    double seconds = 0;
};

struct TrainReport {
    Stage stage = Stage::kVqvae;
    std::vector<EpochRow> rows;
    std::vector<double> lr_trace;        // one entry per epoch run
    std::string final_checkpoint;        // last epoch weights
    std::string best_checkpoint;         // best validation loss weights
    std::vector<int64_t> codebook_usage; // stage 1: assignment histogram
    double initial_loss = -1;            // stage 2: loss before the first step
    double final_loss = 0;
    double final_rec = -1;               // stage 1: eval rec term after training
    double token_accuracy = -1;          // stage 2: final accuracy (held-out if given)
    int epochs_run = 0;

    std::string to_json() const;
    void save(const std::string &path) const;
    void save_csv(const std::string &path) const;
};

/// Stage 1: trains the VQVAE on square equal-area maps. The net is
/// (re)initialized from cfg.seed. val_sp may be empty; checkpoints are
/// written only when cfg.out_dir is set.
TrainReport train_vqvae(const std::vector<Image> &train_sp, const std::vector<Image> &val_sp,
                        const TrainConfig &cfg, VQVAE *net);

/// Index labels for each map under the frozen VQVAE.
std::vector<std::vector<int>> compute_labels(const std::vector<Image> &sp_maps, VQVAE *net);

std::vector<int64_t> label_histogram(const std::vector<std::vector<int>> &labels, int k);

/// Label cache written alongside a dataset manifest.
struct LabelCache {
    int k = 0;
    std::string fingerprint;                 // serialized VQVAE fingerprint
    std::vector<std::string> pano_paths;
    std::vector<std::vector<int>> indices;   // per panorama
    std::vector<int64_t> histogram;

    void save(const std::string &path) const;
    static LabelCache load(const std::string &path);
};

LabelCache compute_label_cache(const std::vector<PanoRecord> &records, VQVAE *net);

/// Stage 2: trains the ViT classifier on (crop, index-sequence) pairs.
/// labels[i] belongs to crops[i]. The VQVAE is not involved.
TrainReport train_vit(const std::vector<CropImage> &train_crops,
                      const std::vector<std::vector<int>> &train_labels,
                      const std::vector<CropImage> &val_crops,
                      const std::vector<std::vector<int>> &val_labels,
                      const TrainConfig &cfg, ViT *net);

/// Fraction of tokens whose predicted index equals the label.
double token_accuracy(ViT *net, const std::vector<CropImage> &crops,
                      const std::vector<std::vector<int>> &labels);

}  // namespace vqtl

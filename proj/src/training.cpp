// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#include "vqtlight/training.hpp"

#include <algorithm>
#include <cstring>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "vqtlight/checkpoint.hpp"

namespace vqtl {

using nlohmann::json;

namespace {

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::vector<size_t> shuffled_indices(size_t n, Rng &rng) {
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    for (size_t i = n; i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

void write_text(const std::string &path, const std::string &text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path);
}

std::string read_text(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

json schedule_to_json(const ScheduleConfig &s) {
    return json{{"kind", s.kind}, {"gamma", s.gamma}, {"milestones", s.milestones}};
}

ScheduleConfig schedule_from_json(const json &j) {
    ScheduleConfig s;
    s.kind = j.at("kind").get<std::string>();
    s.gamma = j.at("gamma").get<double>();
    s.milestones = j.value("milestones", std::vector<int>{});
    if (s.kind != "exponential" && s.kind != "multistep")
        throw std::invalid_argument("schedule kind must be exponential or multistep");
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

const char *stage_name(Stage s) { return s == Stage::kVqvae ? "vqvae" : "vit"; }

Stage stage_from_name(const std::string &name) {
    if (name == "vqvae") return Stage::kVqvae;
    if (name == "vit") return Stage::kVit;
    throw std::invalid_argument("unknown stage '" + name + "'");
}

double exponential_lr(double base, double gamma, int epoch) {
    return base * std::pow(gamma, epoch);
}

double multistep_lr(double base, const std::vector<int> &milestones, double gamma, int epoch) {
    double lr = base;
    for (int m : milestones)
        if (epoch >= m) lr *= gamma;
    return lr;
}

double TrainConfig::lr_at(int epoch) const {
    if (schedule.kind == "exponential") return exponential_lr(lr, schedule.gamma, epoch);
    if (schedule.kind == "multistep") return multistep_lr(lr, schedule.milestones, schedule.gamma, epoch);
    throw std::invalid_argument("unknown schedule kind '" + schedule.kind + "'");
}

VQVAEConfig TrainConfig::vqvae_config() const {
    VQVAEConfig c;
    c.side = pano_side();
    c.k = k;
    return c;
}

ViTConfig TrainConfig::vit_config() const {
    ViTConfig c;
    c.image_side = crop_side;
    c.patch = vit_patch();
    c.k = k;
    c.cnn_backbone = cnn_backbone;
    c.extra_class_tokens = extra_class_tokens ? latent_side * latent_side : 0;
    return c;
}

TrainConfig TrainConfig::vqvae_defaults() {
    TrainConfig cfg;
    cfg.stage = Stage::kVqvae;
    cfg.epochs = 20;
    cfg.batch_size = 16;
    cfg.lr = 5e-4;
    cfg.schedule.kind = "exponential";
    cfg.schedule.gamma = 0.92;
    return cfg;
}

TrainConfig TrainConfig::vit_defaults() {
    TrainConfig cfg;
    cfg.stage = Stage::kVit;
    cfg.epochs = 25;
    cfg.batch_size = 16;
    cfg.lr = 1e-3;
    cfg.schedule.kind = "multistep";
    cfg.schedule.gamma = 0.1;
    cfg.schedule.milestones = {15, 20};
    return cfg;
}

std::string TrainConfig::to_json() const {
    json j{{"stage", stage_name(stage)},
           {"epochs", epochs},
           {"batch_size", batch_size},
           {"lr", lr},
           {"beta1", beta1},
           {"beta2", beta2},
           {"eps", eps},
           {"schedule", schedule_to_json(schedule)},
           {"seed", seed},
           {"k", k},
           {"latent_side", latent_side},
           {"cnn_backbone", cnn_backbone},
           {"extra_class_tokens", extra_class_tokens},
           {"crop_side", crop_side},
           {"target_rec", target_rec},
           {"target_accuracy", target_accuracy},
           {"max_seconds", max_seconds},
           {"out_dir", out_dir}};
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string &text) {
    const json j = json::parse(text);
    TrainConfig cfg;
    cfg.stage = stage_from_name(j.at("stage").get<std::string>());
    cfg = cfg.stage == Stage::kVqvae ? vqvae_defaults() : vit_defaults();
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.beta1 = j.value("beta1", cfg.beta1);
    cfg.beta2 = j.value("beta2", cfg.beta2);
    cfg.eps = j.value("eps", cfg.eps);
    if (j.contains("schedule")) cfg.schedule = schedule_from_json(j.at("schedule"));
    cfg.seed = j.value("seed", cfg.seed);
    cfg.k = j.value("k", cfg.k);
    cfg.latent_side = j.value("latent_side", cfg.latent_side);
    cfg.cnn_backbone = j.value("cnn_backbone", cfg.cnn_backbone);
    cfg.extra_class_tokens = j.value("extra_class_tokens", cfg.extra_class_tokens);
    cfg.crop_side = j.value("crop_side", cfg.crop_side);
    cfg.target_rec = j.value("target_rec", cfg.target_rec);
    cfg.target_accuracy = j.value("target_accuracy", cfg.target_accuracy);
    cfg.max_seconds = j.value("max_seconds", cfg.max_seconds);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    if (cfg.epochs < 1) throw std::invalid_argument("epochs must be positive");
    if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be positive");
    return cfg;
}

void TrainConfig::save(const std::string &path) const { write_text(path, to_json() + "\n"); }

TrainConfig TrainConfig::load(const std::string &path) { return from_json(read_text(path)); }

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

std::string TrainReport::to_json() const {
    json rows_j = json::array();
    for (const EpochRow &r : rows) {
        rows_j.push_back(json{{"epoch", r.epoch},
                              {"loss", r.loss},
                              {"rec", r.rec},
                              {"accuracy", r.accuracy},
                              {"lr", r.lr},
                              {"seconds", r.seconds}});
    }
    json j{{"stage", stage_name(stage)},
           {"rows", rows_j},
           {"lr_trace", lr_trace},
           {"final_checkpoint", final_checkpoint},
           {"best_checkpoint", best_checkpoint},
           {"codebook_usage", codebook_usage},
           {"initial_loss", initial_loss},
           {"final_loss", final_loss},
           {"final_rec", final_rec},
           {"token_accuracy", token_accuracy},
           {"epochs_run", epochs_run}};
    return j.dump(2);
}

void TrainReport::save(const std::string &path) const { write_text(path, to_json() + "\n"); }

void TrainReport::save_csv(const std::string &path) const {
    std::string text = "epoch,loss,rec,accuracy,lr,seconds\n";
    char buf[192];
    for (const EpochRow &r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.3f\n", r.epoch, r.loss,
                      r.rec, r.accuracy, r.lr, r.seconds);
        text += buf;
    }
    write_text(path, text);
}

// ---------------------------------------------------------------------------
// Stage 1
// ---------------------------------------------------------------------------

TrainReport train_vqvae(const std::vector<Image> &train_sp, const std::vector<Image> &val_sp,
                        const TrainConfig &cfg, VQVAE *net) {
    if (cfg.stage != Stage::kVqvae) throw std::invalid_argument("train_vqvae: wrong stage");
    if (train_sp.empty()) throw std::invalid_argument("train_vqvae: empty dataset");

    Rng rng(cfg.seed);
    net->init(rng);
    std::vector<nn::Param *> params = net->params();
    nn::Adam opt(params, cfg.beta1, cfg.beta2, cfg.eps);

    TrainReport report;
    report.stage = Stage::kVqvae;
    const std::string last_path = cfg.out_dir.empty() ? "" : cfg.out_dir + "/vqvae_last.ckpt";
    const std::string best_path = cfg.out_dir.empty() ? "" : cfg.out_dir + "/vqvae_best.ckpt";
    double best_val = std::numeric_limits<double>::infinity();
    const double t_start = now_seconds();

    const std::vector<Image> &selection_set = val_sp.empty() ? train_sp : val_sp;
    const VQVAEStepMask full_mask;
    std::vector<int64_t> usage(net->config().k, 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Entries that drew no assignments in the previous epoch are reseeded
        // from current encoder outputs; a collapsed codebook pins the
        // reconstruction floor no matter how long the decoder trains.
        if (epoch > 0) {
            std::vector<int> dead;
            for (int e = 0; e < net->config().k; ++e)
                if (usage[e] == 0) dead.push_back(e);
            if (!dead.empty()) {
                const size_t pick = rng.uniform_int(0, static_cast<int>(train_sp.size()) - 1);
                const LatentGrid z = net->encode(train_sp[pick]);
                float *book = net->codebook().w.data();
                for (int e : dead) {
                    const int row = rng.uniform_int(0, z.h - 1);
                    const int col = rng.uniform_int(0, z.w - 1);
                    std::memcpy(book + static_cast<size_t>(e) * z.d, z.cell(row, col),
                                sizeof(float) * static_cast<size_t>(z.d));
                }
            }
        }
        std::fill(usage.begin(), usage.end(), 0);

        const double lr_e = cfg.lr_at(epoch);
        const double t0 = now_seconds();
        const std::vector<size_t> order = shuffled_indices(train_sp.size(), rng);

        double loss_sum = 0, rec_sum = 0;
        std::vector<int> step_idx;
        size_t cursor = 0;
        while (cursor < order.size()) {
            const size_t batch = std::min<size_t>(cfg.batch_size, order.size() - cursor);
            opt.zero_grad();
            for (size_t i = 0; i < batch; ++i) {
                VQVAELossTerms terms;
                const double loss =
                    net->train_step(train_sp[order[cursor + i]], full_mask, &terms, &step_idx);
                if (!std::isfinite(loss))
                    throw std::runtime_error("train_vqvae: diverged (non-finite loss)");
                loss_sum += loss;
                rec_sum += terms.rec;
                for (int a : step_idx) ++usage[a];
            }
            opt.scale_grad(1.0 / static_cast<double>(batch));
            opt.step(lr_e);
            cursor += batch;
        }

        EpochRow row;
        row.epoch = epoch;
        row.loss = loss_sum / static_cast<double>(train_sp.size());
        row.rec = rec_sum / static_cast<double>(train_sp.size());
        row.lr = lr_e;
        row.seconds = now_seconds() - t0;
        report.rows.push_back(row);
        report.lr_trace.push_back(lr_e);
        report.final_loss = row.loss;
        report.epochs_run = epoch + 1;

        // Model selection on the validation slice (training slice when absent).
        double val_loss = 0;
        bool have_eval = false;
        double eval_rec = 0;
        if (!last_path.empty() || cfg.target_rec > 0) {
            for (const Image &sp : selection_set) {
                const VQVAELossTerms t = net->eval_terms(sp);
                val_loss += t.rec + t.emb + t.com;
                eval_rec += t.rec;
            }
            val_loss /= static_cast<double>(selection_set.size());
            eval_rec /= static_cast<double>(selection_set.size());
            have_eval = true;
            report.final_rec = eval_rec;
        }
        if (!last_path.empty()) {
            save_checkpoint(last_path, "vqvae", vqvae_fingerprint(net->config()), params);
            if (val_loss < best_val) {
                best_val = val_loss;
                save_checkpoint(best_path, "vqvae", vqvae_fingerprint(net->config()), params);
                report.best_checkpoint = best_path;
            }
            report.final_checkpoint = last_path;
        }
        if (have_eval && cfg.target_rec > 0 && eval_rec <= cfg.target_rec) break;
        if (cfg.max_seconds > 0 && now_seconds() - t_start > cfg.max_seconds) break;
    }

    // Final evaluation pass when the loop never measured one.
    if (report.final_rec < 0) {
        double eval_rec = 0;
        for (const Image &sp : train_sp) eval_rec += net->eval_terms(sp).rec;
        report.final_rec = eval_rec / static_cast<double>(train_sp.size());
    }

    report.codebook_usage.assign(net->config().k, 0);
    for (const Image &sp : train_sp) {
        std::vector<int> idx;
        net->eval_terms(sp, &idx);
        for (int i : idx) ++report.codebook_usage[i];
    }
    return report;
}

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

std::vector<std::vector<int>> compute_labels(const std::vector<Image> &sp_maps, VQVAE *net) {
    std::vector<std::vector<int>> out;
    out.reserve(sp_maps.size());
    for (const Image &sp : sp_maps) {
        const LatentGrid z_e = net->encode(sp);
        out.push_back(net->quantize(z_e).second);
    }
    return out;
}

std::vector<int64_t> label_histogram(const std::vector<std::vector<int>> &labels, int k) {
    std::vector<int64_t> hist(k, 0);
    for (const auto &seq : labels)
        for (int i : seq) {
            if (i < 0 || i >= k) throw std::invalid_argument("label_histogram: index out of range");
            ++hist[i];
        }
    return hist;
}

void LabelCache::save(const std::string &path) const {
    json j{{"version", 1},
           {"k", k},
           {"fingerprint", json::parse(fingerprint)},
           {"pano_paths", pano_paths},
           {"indices", indices},
           {"histogram", histogram}};
    write_text(path, j.dump() + "\n");
}

LabelCache LabelCache::load(const std::string &path) {
    const json j = json::parse(read_text(path));
    if (j.value("version", 0) != 1)
        throw std::runtime_error("label cache " + path + ": unsupported version");
    LabelCache cache;
    cache.k = j.at("k").get<int>();
    cache.fingerprint = j.at("fingerprint").dump();
    cache.pano_paths = j.at("pano_paths").get<std::vector<std::string>>();
    cache.indices = j.at("indices").get<std::vector<std::vector<int>>>();
    cache.histogram = j.value("histogram", std::vector<int64_t>{});
    if (cache.pano_paths.size() != cache.indices.size())
        throw std::runtime_error("label cache " + path + ": path/index count mismatch");
    for (const auto &seq : cache.indices)
        for (int i : seq)
            if (i < 0 || i >= cache.k)
                throw std::runtime_error("label cache " + path + ": index out of range");
    return cache;
}

LabelCache compute_label_cache(const std::vector<PanoRecord> &records, VQVAE *net) {
    LabelCache cache;
    cache.k = net->config().k;
    cache.fingerprint = vqvae_fingerprint(net->config()).dump();
    std::vector<Image> sp_maps;
    for (const PanoRecord &rec : records) {
        cache.pano_paths.push_back(rec.path);
        sp_maps.push_back(rec.sp);
    }
    cache.indices = compute_labels(sp_maps, net);
    cache.histogram = label_histogram(cache.indices, cache.k);
    return cache;
}

// ---------------------------------------------------------------------------
// Stage 2
// ---------------------------------------------------------------------------

double token_accuracy(ViT *net, const std::vector<CropImage> &crops,
                      const std::vector<std::vector<int>> &labels) {
    if (crops.size() != labels.size())
        throw std::invalid_argument("token_accuracy: crop/label count mismatch");
    int64_t hits = 0, total = 0;
    for (size_t i = 0; i < crops.size(); ++i) {
        const std::vector<int> pred = net->predict(crops[i].pixels);
        if (pred.size() != labels[i].size())
            throw std::invalid_argument("token_accuracy: label length mismatch");
        for (size_t t = 0; t < pred.size(); ++t) hits += pred[t] == labels[i][t] ? 1 : 0;
        total += static_cast<int64_t>(pred.size());
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

TrainReport train_vit(const std::vector<CropImage> &train_crops,
                      const std::vector<std::vector<int>> &train_labels,
                      const std::vector<CropImage> &val_crops,
                      const std::vector<std::vector<int>> &val_labels,
                      const TrainConfig &cfg, ViT *net) {
    if (cfg.stage != Stage::kVit) throw std::invalid_argument("train_vit: wrong stage");
    if (train_crops.empty()) throw std::invalid_argument("train_vit: empty dataset");
    if (train_crops.size() != train_labels.size())
        throw std::invalid_argument("train_vit: labels missing for some training pairs");
    if (val_crops.size() != val_labels.size())
        throw std::invalid_argument("train_vit: labels missing for some validation pairs");
    const int tokens = net->config().grid() * net->config().grid();
    for (const auto &seq : train_labels) {
        if (static_cast<int>(seq.size()) != tokens)
            throw std::invalid_argument("train_vit: label sequence length mismatch");
        for (int i : seq)
            if (i < 0 || i >= net->config().k)
                throw std::invalid_argument("train_vit: label outside the classifier head range");
    }

    Rng rng(cfg.seed);
    net->init(rng);
    std::vector<nn::Param *> params = net->params();
    nn::Adam opt(params, cfg.beta1, cfg.beta2, cfg.eps);

    TrainReport report;
    report.stage = Stage::kVit;

    // Mean loss with the initial weights, before any update.
    {
        double init_loss = 0;
        for (size_t i = 0; i < train_crops.size(); ++i)
            init_loss += vit_loss(net->forward_image(train_crops[i].pixels), train_labels[i]);
        report.initial_loss = init_loss / static_cast<double>(train_crops.size());
    }

    const std::string last_path = cfg.out_dir.empty() ? "" : cfg.out_dir + "/vit_last.ckpt";
    const std::string best_path = cfg.out_dir.empty() ? "" : cfg.out_dir + "/vit_best.ckpt";
    double best_val = std::numeric_limits<double>::infinity();
    const double t_start = now_seconds();

    const std::vector<CropImage> &acc_crops = val_crops.empty() ? train_crops : val_crops;
    const std::vector<std::vector<int>> &acc_labels = val_crops.empty() ? train_labels : val_labels;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr_e = cfg.lr_at(epoch);
        const double t0 = now_seconds();
        const std::vector<size_t> order = shuffled_indices(train_crops.size(), rng);

        double loss_sum = 0;
        size_t cursor = 0;
        while (cursor < order.size()) {
            const size_t batch = std::min<size_t>(cfg.batch_size, order.size() - cursor);
            opt.zero_grad();
            for (size_t i = 0; i < batch; ++i) {
                const size_t s = order[cursor + i];
                const double loss = net->train_step(train_crops[s].pixels, train_labels[s]);
                if (!std::isfinite(loss))
                    throw std::runtime_error("train_vit: diverged (non-finite loss)");
                loss_sum += loss;
            }
            opt.scale_grad(1.0 / static_cast<double>(batch));
            opt.step(lr_e);
            cursor += batch;
        }

        EpochRow row;
        row.epoch = epoch;
        row.loss = loss_sum / static_cast<double>(train_crops.size());
        row.lr = lr_e;
        report.final_loss = row.loss;
        report.epochs_run = epoch + 1;

        // Accuracy is measured once the loss is small enough to matter, on
        // the final epoch, and whenever early stopping may trigger.
        const bool last_epoch = epoch == cfg.epochs - 1;
        const bool check_acc = last_epoch || (cfg.target_accuracy > 0 && row.loss < 0.2);
        if (check_acc) {
            row.accuracy = token_accuracy(net, acc_crops, acc_labels);
            report.token_accuracy = row.accuracy;
        }
        row.seconds = now_seconds() - t0;
        report.rows.push_back(row);
        report.lr_trace.push_back(lr_e);

        if (!last_path.empty()) {
            double val_loss = row.loss;
            if (!val_crops.empty()) {
                val_loss = 0;
                for (size_t i = 0; i < val_crops.size(); ++i)
                    val_loss += vit_loss(net->forward_image(val_crops[i].pixels), val_labels[i]);
                val_loss /= static_cast<double>(val_crops.size());
            }
            save_checkpoint(last_path, "vit", vit_fingerprint(net->config()), params);
            if (val_loss < best_val) {
                best_val = val_loss;
                save_checkpoint(best_path, "vit", vit_fingerprint(net->config()), params);
                report.best_checkpoint = best_path;
            }
            report.final_checkpoint = last_path;
        }
        if (cfg.target_accuracy > 0 && row.accuracy >= cfg.target_accuracy) break;
        if (cfg.max_seconds > 0 && now_seconds() - t_start > cfg.max_seconds) break;
    }

    if (report.token_accuracy < 0)
        report.token_accuracy = token_accuracy(net, acc_crops, acc_labels);
    return report;
}

}  // namespace vqtl

// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

// Command-line entry point. Exit codes: 0 success, 1 runtime failure,
// 2 bad arguments. Set VQTLIGHT_DETERMINISTIC=0 to draw seeds from the OS
// when --seed is not given; the default is fully deterministic runs.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vqtlight/dataset.hpp"
#include "vqtlight/evalkit.hpp"
#include "vqtlight/hdr_io.hpp"
#include "vqtlight/inference.hpp"
#include "vqtlight/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vqtl;

namespace {

double wall_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

bool deterministic_mode() {
    const char *v = std::getenv("VQTLIGHT_DETERMINISTIC");
    return v == nullptr || std::string(v) != "0";
}

/// Seed resolution: an explicit --seed always wins; otherwise deterministic
/// mode keeps the default and non-deterministic mode draws from the OS.
uint64_t resolve_seed(uint64_t seed, bool seed_given) {
    if (seed_given || deterministic_mode()) return seed;
    std::random_device rd;
    return (static_cast<uint64_t>(rd()) << 32) | rd();
}

void write_json(const fs::path &path, const json &j) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << j.dump(2) << "\n";
}

/// Run metadata: enough to reproduce the run (resolved config, seeds,
/// fingerprints of every model involved).
void write_run_metadata(const fs::path &dir, json meta) {
    meta["deterministic"] = deterministic_mode();
    write_json(dir / "run.json", meta);
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

struct PrepareArgs {
    std::string out;
    int synthetic = 16;
    uint64_t seed = 7;
    bool seed_given = false;
    int pano_side = 128;
    double train_fraction = 0.75;
    int dump_crops = 0;  // crops per panorama written as images
    int crop_side = 256;
};

int run_prepare(const PrepareArgs &a) {
    const uint64_t seed = resolve_seed(a.seed, a.seed_given);
    const fs::path out(a.out);
    fs::create_directories(out / "panos");

    std::vector<std::string> rel_paths;
    for (int i = 0; i < a.synthetic; ++i) {
        const Image ep = synth_panorama(seed + static_cast<uint64_t>(i), a.pano_side,
                                        2 * a.pano_side);
        char name[64];
        std::snprintf(name, sizeof name, "panos/pano_%03d.hdr", i);
        save_panorama(ep, (out / name).string());
        rel_paths.push_back(name);
    }
    const Manifest m = make_manifest(rel_paths, seed, a.train_fraction);
    save_manifest(m, (out / "manifest.json").string());

    if (a.dump_crops > 0) {
        fs::create_directories(out / "crops");
        for (size_t i = 0; i < m.entries.size(); ++i) {
            const Image ep = load_panorama((out / m.entries[i].path).string());
            const int n_views = std::min<int>(a.dump_crops,
                                              static_cast<int>(m.entries[i].views.size()));
            for (int v = 0; v < n_views; ++v) {
                const ViewParams &vw = m.entries[i].views[v];
                const CropImage crop =
                    crop_fov(ep, vw.yaw, vw.pitch, vw.vfov, a.crop_side, m.tone_map);
                char cname[64];
                std::snprintf(cname, sizeof cname, "crops/pano_%03zu_view_%02d.hdr", i, v);
                save_image(crop.pixels, (out / cname).string());
            }
        }
    }

    size_t pairs = 0;
    for (const auto &e : m.entries) pairs += e.views.size();
    write_run_metadata(out, json{{"command", "prepare"},
                                 {"seed", seed},
                                 {"synthetic", a.synthetic},
                                 {"pano_side", a.pano_side},
                                 {"train_fraction", a.train_fraction},
                                 {"pairs", pairs}});
    std::cout << "wrote " << a.synthetic << " panoramas (" << pairs << " pairs) to " << a.out
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train-vqvae / train-vit
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string out;
    std::string vqvae_ckpt;  // stage 2 only
    TrainConfig cfg;
    bool seed_given = false;
    bool k_given = false;
    bool latent_given = false;
};

int run_train_vqvae(TrainArgs &a) {
    a.cfg.seed = resolve_seed(a.cfg.seed, a.seed_given);
    a.cfg.out_dir = a.out;
    fs::create_directories(a.out);

    const Manifest m = load_manifest((fs::path(a.data) / "manifest.json").string());
    const SphereMapping mapping = build_mapping(a.cfg.pano_side());
    const auto train_recs = load_split(m, "train", mapping, a.data);
    const auto val_recs = load_split(m, "test", mapping, a.data);
    std::vector<Image> train_sp, val_sp;
    for (const auto &r : train_recs) train_sp.push_back(r.sp);
    for (const auto &r : val_recs) val_sp.push_back(r.sp);
    std::cout << "stage 1: " << train_sp.size() << " train maps, " << val_sp.size()
              << " validation maps\n";

    VQVAE net(a.cfg.vqvae_config());
    const TrainReport report = train_vqvae(train_sp, val_sp, a.cfg, &net);
    report.save((fs::path(a.out) / "report.json").string());
    report.save_csv((fs::path(a.out) / "report.csv").string());
    a.cfg.save((fs::path(a.out) / "config.json").string());

    int used = 0;
    for (int64_t c : report.codebook_usage)
        if (c > 0) ++used;
    write_run_metadata(a.out, json{{"command", "train-vqvae"},
                                   {"seed", a.cfg.seed},
                                   {"data", a.data},
                                   {"config", json::parse(a.cfg.to_json())},
                                   {"fingerprint", vqvae_fingerprint(a.cfg.vqvae_config())},
                                   {"final_checkpoint", report.final_checkpoint},
                                   {"best_checkpoint", report.best_checkpoint},
                                   {"codebook_entries_used", used}});
    std::printf("stage 1 done: %d epochs, final loss %.6f, rec %.6f, %d/%d codebook entries\n",
                report.epochs_run, report.final_loss, report.final_rec, used,
                a.cfg.vqvae_config().k);
    return 0;
}

int run_train_vit(TrainArgs &a) {
    a.cfg.stage = Stage::kVit;
    a.cfg.seed = resolve_seed(a.cfg.seed, a.seed_given);
    a.cfg.out_dir = a.out;
    fs::create_directories(a.out);

    VQVAE vq = load_vqvae(a.vqvae_ckpt);
    const VQVAEConfig &vc = vq.config();
    if (a.k_given && a.cfg.k != vc.k)
        throw std::runtime_error("--k disagrees with the codebook checkpoint (" +
                                 std::to_string(vc.k) + ")");
    if (a.latent_given && a.cfg.latent_side != vc.latent_extent())
        throw std::runtime_error("--latent-side disagrees with the checkpoint (" +
                                 std::to_string(vc.latent_extent()) + ")");
    a.cfg.k = vc.k;
    a.cfg.latent_side = vc.latent_extent();

    const Manifest m = load_manifest((fs::path(a.data) / "manifest.json").string());
    const SphereMapping mapping = build_mapping(vc.side);
    const auto train_recs = load_split(m, "train", mapping, a.data);
    const auto val_recs = load_split(m, "test", mapping, a.data);

    // Labels come from the frozen stage-1 model and are cached next to the
    // manifest, keyed by the model fingerprint.
    const std::string cache_path = (fs::path(a.data) / "labels.json").string();
    const std::string fp = vqvae_fingerprint(vc).dump();
    LabelCache cache;
    bool cache_ok = false;
    if (fs::exists(cache_path)) {
        cache = LabelCache::load(cache_path);
        cache_ok = cache.fingerprint == fp;
    }
    if (!cache_ok) {
        std::vector<PanoRecord> all = train_recs;
        all.insert(all.end(), val_recs.begin(), val_recs.end());
        cache = compute_label_cache(all, &vq);
        cache.save(cache_path);
    }
    auto labels_for = [&](const std::string &path) -> const std::vector<int> & {
        for (size_t i = 0; i < cache.pano_paths.size(); ++i)
            if (cache.pano_paths[i] == path) return cache.indices[i];
        throw std::runtime_error("label cache is missing " + path);
    };

    std::vector<CropImage> train_crops, val_crops;
    std::vector<std::vector<int>> train_labels, val_labels;
    for (const auto &r : train_recs)
        for (size_t v = 0; v < r.views.size(); ++v) {
            train_crops.push_back(make_pair(r, static_cast<int>(v), m.tone_map).crop);
            train_labels.push_back(labels_for(r.path));
        }
    for (const auto &r : val_recs)
        for (size_t v = 0; v < r.views.size(); ++v) {
            val_crops.push_back(make_pair(r, static_cast<int>(v), m.tone_map).crop);
            val_labels.push_back(labels_for(r.path));
        }
    std::cout << "stage 2: " << train_crops.size() << " train crops, " << val_crops.size()
              << " validation crops\n";

    ViT net(a.cfg.vit_config());
    const TrainReport report = train_vit(train_crops, train_labels, val_crops, val_labels,
                                         a.cfg, &net);
    report.save((fs::path(a.out) / "report.json").string());
    report.save_csv((fs::path(a.out) / "report.csv").string());
    a.cfg.save((fs::path(a.out) / "config.json").string());

    write_run_metadata(a.out, json{{"command", "train-vit"},
                                   {"seed", a.cfg.seed},
                                   {"data", a.data},
                                   {"vqvae_checkpoint", a.vqvae_ckpt},
                                   {"config", json::parse(a.cfg.to_json())},
                                   {"vit_fingerprint", vit_fingerprint(a.cfg.vit_config())},
                                   {"vqvae_fingerprint", json::parse(fp)},
                                   {"final_checkpoint", report.final_checkpoint},
                                   {"best_checkpoint", report.best_checkpoint}});
    std::printf("stage 2 done: %d epochs, final loss %.6f, token accuracy %.4f\n",
                report.epochs_run, report.final_loss, report.token_accuracy);
    return 0;
}

// ---------------------------------------------------------------------------
// infer / time
// ---------------------------------------------------------------------------

int run_infer(const std::string &crop_path, const std::string &vit_path,
              const std::string &vqvae_path, const std::string &out_path) {
    EstimatorBundle bundle = load_bundle(vit_path, vqvae_path);
    const Image crop = load_image(crop_path);
    const double t0 = wall_seconds();
    const Image ep = estimate_lighting(crop, bundle);
    const double dt = wall_seconds() - t0;
    save_panorama(ep, out_path);
    std::printf("wrote %dx%dx3 panorama to %s (%.3f s)\n", ep.h, ep.w, out_path.c_str(), dt);
    return 0;
}

Image default_timing_crop(int side) {
    const Image pano = synth_panorama(1234, 128, 256);
    return crop_fov(pano, 0.3, 0.1, 60.0 * 3.14159265358979323846 / 180.0, side).pixels;
}

int run_time(const std::string &vit_path, const std::string &vqvae_path,
             const std::string &crop_path, int warmup, int runs) {
    EstimatorBundle bundle = load_bundle(vit_path, vqvae_path);
    const Image crop = crop_path.empty()
                           ? default_timing_crop(bundle.vit.config().image_side)
                           : load_image(crop_path);
    const LatencyStats stats = time_inference(bundle, crop, warmup, runs);
    std::printf("latency over %d runs (%d warmup): mean %.4f s, p50 %.4f s, p95 %.4f s\n",
                runs, warmup, stats.mean, stats.p50, stats.p95);
    std::printf("reference latency budget: 0.025 s (context, not asserted)\n");
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int run_evaluate(const std::string &pred_dir, const std::string &gt_dir,
                 const std::string &report_path, int image_size) {
    std::vector<std::string> names;
    for (const auto &e : fs::directory_iterator(gt_dir)) {
        const std::string ext = e.path().extension().string();
        if (ext != ".hdr" && ext != ".vqtl") continue;
        if (fs::exists(fs::path(pred_dir) / e.path().filename())) {
            names.push_back(e.path().filename().string());
        }
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) throw std::runtime_error("no common panorama files between directories");

    json items = json::array();
    double sum_rmse = 0, sum_ssim = 0, sum_ang = 0;
    for (const std::string &name : names) {
        const Image pred = load_panorama((fs::path(pred_dir) / name).string());
        const Image gt = load_panorama((fs::path(gt_dir) / name).string());
        const MetricsRecord rec = evaluate_pair(pred, gt, image_size);
        sum_rmse += rec.rmse;
        sum_ssim += rec.ssim;
        sum_ang += rec.angular_deg;
        json per_mat = json::array();
        for (const auto &e : rec.per_material)
            per_mat.push_back({{"material", e.material},
                               {"rmse", e.rmse},
                               {"ssim", e.ssim},
                               {"angular_deg", e.angular_deg}});
        items.push_back({{"name", name},
                         {"rmse", rec.rmse},
                         {"ssim", rec.ssim},
                         {"angular_deg", rec.angular_deg},
                         {"per_material", per_mat}});
        std::printf("%-28s rmse %.4f  ssim %.4f  angular %.3f\n", name.c_str(), rec.rmse,
                    rec.ssim, rec.angular_deg);
    }
    const double n = static_cast<double>(names.size());
    std::printf("%-28s rmse %.4f  ssim %.4f  angular %.3f\n", "mean", sum_rmse / n,
                sum_ssim / n, sum_ang / n);
    write_json(report_path, json{{"image_size", image_size},
                                 {"count", names.size()},
                                 {"mean", {{"rmse", sum_rmse / n},
                                           {"ssim", sum_ssim / n},
                                           {"angular_deg", sum_ang / n}}},
                                 {"items", items}});
    return 0;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

struct AblateArgs {
    std::string out;
    int option = 0;  // 0 = all five
    int panos = 4;
    int epochs1 = 2;
    int epochs2 = 2;
    int eval_size = 48;
    uint64_t seed = 7;
    bool seed_given = false;
};

struct OptionSpec {
    int number;
    const char *label;
    int k;
    bool cnn;
    bool cls;
};

constexpr OptionSpec kOptions[5] = {
    {1, "K=64 ViT", 64, false, false},
    {2, "K=128 ViT", 128, false, false},
    {3, "K=256 ViT", 256, false, false},
    {4, "K=128 CNN", 128, true, false},
    {5, "K=128 ViT + class tokens", 128, false, true},
};

json run_one_option(const OptionSpec &opt, const AblateArgs &a, uint64_t seed,
                    const std::vector<Image> &panos_ep) {
    const fs::path dir = fs::path(a.out) / ("option_" + std::to_string(opt.number));
    fs::create_directories(dir);

    TrainConfig c1 = TrainConfig::vqvae_defaults();
    c1.k = opt.k;
    c1.epochs = a.epochs1;
    c1.batch_size = 4;
    c1.seed = seed;
    c1.out_dir = dir.string();

    const SphereMapping mapping = build_mapping(c1.pano_side());
    std::vector<Image> sp_maps;
    for (const Image &ep : panos_ep) sp_maps.push_back(ep_to_sp(ep, mapping));

    const double t1 = wall_seconds();
    VQVAE vq(c1.vqvae_config());
    const TrainReport rep1 = train_vqvae(sp_maps, {}, c1, &vq);
    const auto labels = compute_labels(sp_maps, &vq);

    TrainConfig c2 = TrainConfig::vit_defaults();
    c2.k = opt.k;
    c2.cnn_backbone = opt.cnn;
    c2.extra_class_tokens = opt.cls;
    c2.epochs = a.epochs2;
    c2.batch_size = 2;
    c2.seed = seed + 1;
    c2.out_dir = dir.string();

    std::vector<CropImage> crops;
    for (size_t i = 0; i < panos_ep.size(); ++i) {
        const auto views = sample_views(seed + 100 + i, 1);
        crops.push_back(
            crop_fov(panos_ep[i], views[0].yaw, views[0].pitch, views[0].vfov, c2.crop_side));
    }
    ViT vit(c2.vit_config());
    const TrainReport rep2 = train_vit(crops, labels, {}, {}, c2, &vit);
    const double train_s = wall_seconds() - t1;

    EstimatorBundle bundle = load_bundle(rep2.final_checkpoint, rep1.final_checkpoint);
    const ViTConfig vcfg = bundle.vit.config();
    const int token_seq = vcfg.cnn_backbone ? vcfg.n() : vcfg.n() + vcfg.extra_class_tokens;

    double sum_rmse = 0, sum_ssim = 0, sum_ang = 0, infer_s = 0;
    for (size_t i = 0; i < panos_ep.size(); ++i) {
        const double t0 = wall_seconds();
        const Image pred = estimate_lighting(crops[i].pixels, bundle);
        infer_s += wall_seconds() - t0;
        const MetricsRecord rec = evaluate_pair(pred, panos_ep[i], a.eval_size);
        sum_rmse += rec.rmse;
        sum_ssim += rec.ssim;
        sum_ang += rec.angular_deg;
    }
    const double n = static_cast<double>(panos_ep.size());

    json row{{"option", opt.number},
             {"label", opt.label},
             {"k", opt.k},
             {"backbone", opt.cnn ? "cnn" : "vit"},
             {"class_tokens", opt.cls},
             {"params", bundle.vit.param_count()},
             {"token_seq", token_seq},
             {"rmse", sum_rmse / n},
             {"ssim", sum_ssim / n},
             {"angular_deg", sum_ang / n},
             {"train_s", train_s},
             {"infer_s", infer_s / n}};
    write_json(dir / "option.json", row);
    return row;
}

int run_ablate(const AblateArgs &a) {
    if (a.option < 0 || a.option > 5) throw std::runtime_error("--option must be 1..5");
    const uint64_t seed = resolve_seed(a.seed, a.seed_given);
    fs::create_directories(a.out);

    std::vector<Image> panos_ep;
    for (int i = 0; i < a.panos; ++i)
        panos_ep.push_back(synth_panorama(seed + static_cast<uint64_t>(i)));

    json rows = json::array();
    for (const OptionSpec &opt : kOptions) {
        if (a.option != 0 && opt.number != a.option) continue;
        std::printf("option %d (%s)...\n", opt.number, opt.label);
        rows.push_back(run_one_option(opt, a, seed, panos_ep));
    }

    std::printf("\n%-3s %-26s %9s %9s %8s %8s %9s %9s\n", "opt", "variant", "params",
                "tokens", "rmse", "ssim", "angular", "infer_s");
    for (const json &r : rows) {
        std::printf("%-3d %-26s %9zu %9d %8.4f %8.4f %9.3f %9.3f\n", r["option"].get<int>(),
                    r["label"].get<std::string>().c_str(), r["params"].get<size_t>(),
                    r["token_seq"].get<int>(), r["rmse"].get<double>(), r["ssim"].get<double>(),
                    r["angular_deg"].get<double>(), r["infer_s"].get<double>());
    }
    write_json(fs::path(a.out) / "ablate_report.json",
               json{{"seed", seed},
                    {"panos", a.panos},
                    {"epochs_stage1", a.epochs1},
                    {"epochs_stage2", a.epochs2},
                    {"eval_size", a.eval_size},
                    {"rows", rows}});
    write_run_metadata(a.out, json{{"command", "ablate"}, {"seed", seed}});
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"vqtlight: lightweight HDR illumination map prediction"};
    app.require_subcommand(1);

    PrepareArgs prep;
    auto *cmd_prep = app.add_subcommand("prepare", "Generate a synthetic dataset");
    cmd_prep->add_option("--out", prep.out, "Output dataset directory")->required();
    cmd_prep->add_option("--synthetic", prep.synthetic, "Number of panoramas")
        ->check(CLI::PositiveNumber);
    auto *prep_seed = cmd_prep->add_option("--seed", prep.seed, "RNG seed");
    cmd_prep->add_option("--pano-side", prep.pano_side, "Panorama height (width is 2x)");
    cmd_prep->add_option("--train-fraction", prep.train_fraction, "Train split fraction")
        ->check(CLI::Range(0.0, 1.0));
    cmd_prep->add_option("--dump-crops", prep.dump_crops, "Crops per panorama to write")
        ->check(CLI::NonNegativeNumber);
    cmd_prep->add_option("--crop-side", prep.crop_side, "Crop image side")
        ->check(CLI::PositiveNumber);

    TrainArgs tv;
    tv.cfg = TrainConfig::vqvae_defaults();
    auto *cmd_tv = app.add_subcommand("train-vqvae", "Stage 1: train the map autoencoder");
    cmd_tv->add_option("--data", tv.data, "Dataset directory (from prepare)")->required();
    cmd_tv->add_option("--out", tv.out, "Run output directory")->required();
    cmd_tv->add_option("--epochs", tv.cfg.epochs)->check(CLI::PositiveNumber);
    cmd_tv->add_option("--batch", tv.cfg.batch_size)->check(CLI::PositiveNumber);
    cmd_tv->add_option("--lr", tv.cfg.lr)->check(CLI::PositiveNumber);
    cmd_tv->add_option("--gamma", tv.cfg.schedule.gamma, "Per-epoch LR decay");
    auto *tv_seed = cmd_tv->add_option("--seed", tv.cfg.seed);
    auto *tv_k = cmd_tv->add_option("--k", tv.cfg.k, "Codebook size")
                     ->check(CLI::IsMember({64, 128, 256}));
    auto *tv_ls = cmd_tv->add_option("--latent-side", tv.cfg.latent_side, "Feature resolution")
                      ->check(CLI::IsMember({16, 32, 64}));
    cmd_tv->add_option("--target-rec", tv.cfg.target_rec, "Early-stop reconstruction loss");
    cmd_tv->add_option("--max-seconds", tv.cfg.max_seconds, "Wall-clock budget");

    TrainArgs tc;
    tc.cfg = TrainConfig::vit_defaults();
    auto *cmd_tc = app.add_subcommand("train-vit", "Stage 2: train the index classifier");
    cmd_tc->add_option("--data", tc.data, "Dataset directory (from prepare)")->required();
    cmd_tc->add_option("--vqvae", tc.vqvae_ckpt, "Stage-1 checkpoint")->required();
    cmd_tc->add_option("--out", tc.out, "Run output directory")->required();
    cmd_tc->add_option("--epochs", tc.cfg.epochs)->check(CLI::PositiveNumber);
    cmd_tc->add_option("--batch", tc.cfg.batch_size)->check(CLI::PositiveNumber);
    cmd_tc->add_option("--lr", tc.cfg.lr)->check(CLI::PositiveNumber);
    cmd_tc->add_option("--gamma", tc.cfg.schedule.gamma, "LR decay at each milestone");
    cmd_tc->add_option("--milestones", tc.cfg.schedule.milestones, "LR decay epochs");
    auto *tc_seed = cmd_tc->add_option("--seed", tc.cfg.seed);
    auto *tc_k = cmd_tc->add_option("--k", tc.cfg.k, "Codebook size (must match checkpoint)");
    auto *tc_ls = cmd_tc->add_option("--latent-side", tc.cfg.latent_side,
                                     "Feature resolution (must match checkpoint)");
    cmd_tc->add_flag("--cnn", tc.cfg.cnn_backbone, "Convolutional backbone variant");
    cmd_tc->add_flag("--class-tokens", tc.cfg.extra_class_tokens,
                     "Prepend learnable class tokens");
    cmd_tc->add_option("--target-accuracy", tc.cfg.target_accuracy, "Early-stop token accuracy");
    cmd_tc->add_option("--max-seconds", tc.cfg.max_seconds, "Wall-clock budget");

    std::string in_crop, in_vit, in_vqvae, in_out;
    auto *cmd_inf = app.add_subcommand("infer", "Predict an HDR panorama from one crop");
    cmd_inf->add_option("--crop", in_crop, "Input crop image")->required();
    cmd_inf->add_option("--vit", in_vit, "Classifier checkpoint")->required();
    cmd_inf->add_option("--vqvae", in_vqvae, "Autoencoder checkpoint")->required();
    cmd_inf->add_option("--out", in_out, "Output panorama (.hdr or .vqtl)")->required();

    std::string ev_pred, ev_gt, ev_report;
    int ev_size = 96;
    auto *cmd_ev = app.add_subcommand("evaluate", "Render-based comparison of panorama dirs");
    cmd_ev->add_option("--pred-dir", ev_pred, "Predicted panoramas")->required();
    cmd_ev->add_option("--gt-dir", ev_gt, "Ground-truth panoramas")->required();
    cmd_ev->add_option("--report", ev_report, "Output JSON report path")->required();
    cmd_ev->add_option("--image-size", ev_size, "Render resolution")->check(CLI::PositiveNumber);

    std::string tm_vit, tm_vqvae, tm_crop;
    int tm_warm = 3, tm_runs = 20;
    auto *cmd_tm = app.add_subcommand("time", "Measure inference latency");
    cmd_tm->add_option("--vit", tm_vit, "Classifier checkpoint")->required();
    cmd_tm->add_option("--vqvae", tm_vqvae, "Autoencoder checkpoint")->required();
    cmd_tm->add_option("--crop", tm_crop, "Crop image (default: synthetic)");
    cmd_tm->add_option("--warmup", tm_warm)->check(CLI::NonNegativeNumber);
    cmd_tm->add_option("--runs", tm_runs)->check(CLI::PositiveNumber);

    AblateArgs ab;
    auto *cmd_ab = app.add_subcommand("ablate", "Desk-scale sweep of the five design options");
    cmd_ab->add_option("--out", ab.out, "Output directory")->required();
    cmd_ab->add_option("--option", ab.option, "Run a single option (1..5)")
        ->check(CLI::Range(1, 5));
    cmd_ab->add_option("--panos", ab.panos, "Synthetic panorama count")
        ->check(CLI::PositiveNumber);
    cmd_ab->add_option("--epochs1", ab.epochs1, "Stage-1 epochs")->check(CLI::PositiveNumber);
    cmd_ab->add_option("--epochs2", ab.epochs2, "Stage-2 epochs")->check(CLI::PositiveNumber);
    cmd_ab->add_option("--eval-size", ab.eval_size, "Render resolution")
        ->check(CLI::PositiveNumber);
    auto *ab_seed = cmd_ab->add_option("--seed", ab.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 2;
    }

    prep.seed_given = prep_seed->count() > 0;
    tv.seed_given = tv_seed->count() > 0;
    tv.k_given = tv_k->count() > 0;
    tv.latent_given = tv_ls->count() > 0;
    tc.seed_given = tc_seed->count() > 0;
    tc.k_given = tc_k->count() > 0;
    tc.latent_given = tc_ls->count() > 0;
    ab.seed_given = ab_seed->count() > 0;

    try {
        if (cmd_prep->parsed()) return run_prepare(prep);
        if (cmd_tv->parsed()) return run_train_vqvae(tv);
        if (cmd_tc->parsed()) return run_train_vit(tc);
        if (cmd_inf->parsed()) return run_infer(in_crop, in_vit, in_vqvae, in_out);
        if (cmd_ev->parsed()) return run_evaluate(ev_pred, ev_gt, ev_report, ev_size);
        if (cmd_tm->parsed()) return run_time(tm_vit, tm_vqvae, tm_crop, tm_warm, tm_runs);
        if (cmd_ab->parsed()) return run_ablate(ab);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

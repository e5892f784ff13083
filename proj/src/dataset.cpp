// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#include "vqtlight/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "vqtlight/hdr_io.hpp"

namespace vqtl {

using nlohmann::json;

double tone_map_exposure(const Image &linear, const ToneMap &tm) {
    std::vector<float> lum;
    lum.reserve(static_cast<size_t>(linear.h) * linear.w);
    for (int y = 0; y < linear.h; ++y)
        for (int x = 0; x < linear.w; ++x)
            lum.push_back(luminance(linear.at(y, x, 0), linear.at(y, x, 1),
                                    linear.at(y, x, 2)));
    const double p90 = percentile(lum, 0.9);
    if (!(p90 > 0)) return 1.0;
    return std::pow(tm.p90_target, tm.gamma) / p90;
}

Image tone_map_fixed(const Image &linear, double exposure, double gamma) {
    const double inv_gamma = 1.0 / gamma;
    Image out(linear.h, linear.w, linear.c);
    for (size_t i = 0; i < linear.data.size(); ++i) {
        const double v = std::pow(std::max(0.0, exposure * linear.data[i]), inv_gamma);
        out.data[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return out;
}

Image tone_map(const Image &linear, const ToneMap &tm) {
    return tone_map_fixed(linear, tone_map_exposure(linear, tm), tm.gamma);
}

Vec3 crop_ray(const ViewParams &view, double y_px, double x_px, int side) {
    const Vec3 forward{std::cos(view.pitch) * std::cos(view.yaw),
                       std::cos(view.pitch) * std::sin(view.yaw), std::sin(view.pitch)};
    const Vec3 world_up{0, 0, 1};
    Vec3 right = forward.cross(world_up);
    const double rn = right.norm();
    if (rn < 1e-12) throw std::invalid_argument("crop_ray: view too close to a pole");
    right = right * (1.0 / rn);
    const Vec3 up = right.cross(forward);
    const double tan_half = std::tan(view.vfov / 2.0);
    const double u = ((x_px + 0.5) / side) * 2.0 - 1.0;
    const double v = 1.0 - ((y_px + 0.5) / side) * 2.0;
    const Vec3 dir = forward + right * (u * tan_half) + up * (v * tan_half);
    return dir.normalized();
}

CropImage crop_fov(const Image &pano_ep, double yaw, double pitch, double vfov, int side,
                   const ToneMap &tm) {
    validate_ep(pano_ep, "crop_fov");
    constexpr double kDeg = M_PI / 180.0;
    if (!(vfov > 10.0 * kDeg && vfov < 120.0 * kDeg))
        throw std::invalid_argument("crop_fov: vfov out of (10, 120) degrees");
    if (!(std::abs(pitch) <= 60.0 * kDeg))
        throw std::invalid_argument("crop_fov: |pitch| above 60 degrees");

    const ViewParams view{yaw, pitch, vfov};
    Image linear(side, side, 3);
    float rgb[3];
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const Vec3 d = crop_ray(view, y, x, side);
            double u, v;
            ep_coords_from_dir(d, pano_ep.h, pano_ep.w, &u, &v);
            bilinear_wrap_x(pano_ep, u, v, rgb);
            for (int c = 0; c < 3; ++c) linear.at(y, x, c) = rgb[c];
        }
    return CropImage{tone_map(linear, tm), view};
}

std::vector<ViewParams> sample_views(uint64_t seed, int count, double vfov_deg) {
    Rng rng(seed);
    constexpr double kDeg = M_PI / 180.0;
    std::vector<ViewParams> views(count);
    for (auto &v : views) {
        v.yaw = rng.uniform(0.0, 2.0 * M_PI);
        v.pitch = rng.uniform(-30.0 * kDeg, 30.0 * kDeg);
        v.vfov = vfov_deg * kDeg;
    }
    return views;
}

std::vector<DataPair> make_pairs(const Image &pano_ep, const SphereMapping &mapping,
                                 uint64_t seed) {
    validate_ep(pano_ep, "make_pairs");
    const Image sp = ep_to_sp(pano_ep, mapping);
    std::vector<DataPair> pairs;
    for (const ViewParams &v : sample_views(seed)) {
        DataPair p;
        p.pano_ep = pano_ep;
        p.pano_sp = sp;
        p.crop = crop_fov(pano_ep, v.yaw, v.pitch, v.vfov);
        pairs.push_back(std::move(p));
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// Synthetic panoramas
// ---------------------------------------------------------------------------

Image synth_panorama(uint64_t seed, int height, int width) {
    Rng rng(seed);
    Image pano(height, width, 3);

    // Ambient: positive low-frequency gradient along a random axis.
    const Vec3 grad_axis = Vec3{rng.normal(), rng.normal(), rng.normal()}.normalized();
    double base[3], tilt[3];
    for (int c = 0; c < 3; ++c) base[c] = rng.uniform(0.2, 1.0);
    for (int c = 0; c < 3; ++c) tilt[c] = rng.uniform(0.1, 0.6);
    const double ambient_mean = (base[0] + base[1] + base[2]) / 3.0;

    // Area lights: bright Gaussian lobes around random directions.
    const int n_lights = rng.uniform_int(1, 4);
    struct Light {
        Vec3 dir;
        double sigma;
        double intensity[3];
    };
    std::vector<Light> lights(n_lights);
    for (auto &l : lights) {
        const double lam = rng.uniform(0.0, 2.0 * M_PI);
        const double sin_phi = rng.uniform(-0.9, 0.9);
        const double cos_phi = std::sqrt(1.0 - sin_phi * sin_phi);
        l.dir = Vec3{cos_phi * std::cos(lam), cos_phi * std::sin(lam), sin_phi};
        l.sigma = rng.uniform(0.05, 0.3);
        const double peak = rng.uniform(20.0, 100.0) * ambient_mean;
        for (int c = 0; c < 3; ++c) l.intensity[c] = peak * rng.uniform(0.6, 1.0);
    }

    // Texture band: sinusoidal modulation between two latitudes.
    const double band_lo = rng.uniform(-0.6, -0.1);
    const double band_hi = band_lo + rng.uniform(0.3, 0.7);
    const double freq_lon = std::floor(rng.uniform(4.0, 12.0));
    const double freq_lat = std::floor(rng.uniform(2.0, 6.0));

    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const Vec3 d = ep_pixel_dir(y, x, height, width);
            const double g = d.dot(grad_axis);
            const double phi = std::asin(std::clamp(d.z, -1.0, 1.0));
            const double lam = std::atan2(d.y, d.x);
            double tex = 1.0;
            if (phi > band_lo && phi < band_hi)
                tex += 0.5 * std::sin(freq_lon * lam) * std::sin(freq_lat * phi * M_PI);
            for (int c = 0; c < 3; ++c) {
                double v = (base[c] + tilt[c] * g) * tex;
                v = std::max(v, 0.01);
                for (const auto &l : lights) {
                    const double cosang = std::clamp(d.dot(l.dir), -1.0, 1.0);
                    const double ang = std::acos(cosang);
                    v += l.intensity[c] * std::exp(-0.5 * (ang / l.sigma) * (ang / l.sigma));
                }
                pano.at(y, x, c) = static_cast<float>(v);
            }
        }
    return pano;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

Manifest make_manifest(const std::vector<std::string> &pano_paths, uint64_t seed,
                       double train_fraction, double vfov_deg) {
    if (train_fraction < 0 || train_fraction > 1)
        throw std::invalid_argument("make_manifest: train_fraction outside [0,1]");
    Manifest m;
    m.seed = seed;
    m.vfov_deg = vfov_deg;
    const size_t n = pano_paths.size();
    const size_t n_train = static_cast<size_t>(std::ceil(train_fraction * n));
    for (size_t i = 0; i < n; ++i) {
        ManifestEntry e;
        e.path = pano_paths[i];
        e.split = i < n_train ? "train" : "test";
        // Per-panorama view seed; decorrelated from neighbors but reproducible.
        e.views = sample_views(seed + 0x9e3779b97f4a7c15ull * (i + 1), 10, vfov_deg);
        m.entries.push_back(std::move(e));
    }
    return m;
}

void save_manifest(const Manifest &m, const std::string &path) {
    json j;
    j["version"] = m.version;
    j["seed"] = m.seed;
    j["vfov_deg"] = m.vfov_deg;
    j["tone_map"] = {{"gamma", m.tone_map.gamma}, {"p90_target", m.tone_map.p90_target}};
    json entries = json::array();
    for (const auto &e : m.entries) {
        json views = json::array();
        for (const auto &v : e.views)
            views.push_back({{"yaw", v.yaw}, {"pitch", v.pitch}, {"vfov", v.vfov}});
        entries.push_back({{"path", e.path}, {"split", e.split}, {"views", views}});
    }
    j["panoramas"] = entries;
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_manifest: cannot open " + path);
    os << j.dump(2) << "\n";
}

Manifest load_manifest(const std::string &path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_manifest: cannot open " + path);
    json j;
    is >> j;
    Manifest m;
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw std::runtime_error("load_manifest: unsupported version");
    m.seed = j.at("seed").get<uint64_t>();
    m.vfov_deg = j.at("vfov_deg").get<double>();
    m.tone_map.gamma = j.at("tone_map").at("gamma").get<double>();
    m.tone_map.p90_target = j.at("tone_map").at("p90_target").get<double>();
    for (const auto &e : j.at("panoramas")) {
        ManifestEntry entry;
        entry.path = e.at("path").get<std::string>();
        entry.split = e.at("split").get<std::string>();
        for (const auto &v : e.at("views"))
            entry.views.push_back(ViewParams{v.at("yaw").get<double>(),
                                             v.at("pitch").get<double>(),
                                             v.at("vfov").get<double>()});
        if (entry.views.size() != 10)
            throw std::runtime_error("load_manifest: expected 10 views per panorama");
        if (entry.split != "train" && entry.split != "test")
            throw std::runtime_error("load_manifest: unknown split " + entry.split);
        m.entries.push_back(std::move(entry));
    }
    return m;
}

std::vector<PanoRecord> load_split(const Manifest &m, const std::string &split,
                                   const SphereMapping &mapping,
                                   const std::string &base_dir) {
    std::vector<PanoRecord> out;
    for (const auto &e : m.entries) {
        if (split != "all" && e.split != split) continue;
        PanoRecord rec;
        rec.path = e.path;
        const std::string full = base_dir.empty() ? e.path : base_dir + "/" + e.path;
        rec.ep = load_panorama(full);
        rec.sp = ep_to_sp(rec.ep, mapping);
        rec.views = e.views;
        out.push_back(std::move(rec));
    }
    return out;
}

DataPair make_pair(const PanoRecord &rec, int view_index, const ToneMap &tm) {
    if (view_index < 0 || view_index >= static_cast<int>(rec.views.size()))
        throw std::invalid_argument("make_pair: view index out of range");
    const ViewParams &v = rec.views[view_index];
    DataPair p;
    p.pano_ep = rec.ep;
    p.pano_sp = rec.sp;
    p.crop = crop_fov(rec.ep, v.yaw, v.pitch, v.vfov, 256, tm);
    return p;
}

}  // namespace vqtl

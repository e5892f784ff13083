// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "vqtlight/image.hpp"
#include "vqtlight/projection.hpp"

namespace vqtl {

struct ViewParams {
    double yaw = 0;    // radians, about +z
    double pitch = 0;  // radians, positive looks up
    double vfov = 0;   // vertical field of view, radians
};

struct CropImage {
    Image pixels;  // tone-mapped LDR, values in [0,1]
    ViewParams view;
};

struct DataPair {
    Image pano_ep;  // 128 x 256 x 3 linear radiance
    Image pano_sp;  // 128 x 128 x 3 linear radiance
    CropImage crop; // 256 x 256 x 3 LDR
};

/// Tone-map parameters: exposure is chosen per image so the 90th-percentile
/// luminance lands at p90_target after gamma.
struct ToneMap {
    double gamma = 2.2;
    double p90_target = 0.8;
};

/// clamp((exposure * v)^(1/gamma), 0, 1) applied per channel.
Image tone_map(const Image &linear, const ToneMap &tm);
/// The exposure tone_map would use for this image.
double tone_map_exposure(const Image &linear, const ToneMap &tm);
/// Tone map with a caller-supplied exposure (shared-exposure comparisons).
Image tone_map_fixed(const Image &linear, double exposure, double gamma);

/// Ray through crop pixel (y_px, x_px) in a side x side image; fractional
/// coordinates address pixel corners, so (side/2 - 0.5) hits the view axis.
Vec3 crop_ray(const ViewParams &view, double y_px, double x_px, int side);

/// Rectilinear crop of an equirectangular panorama, tone-mapped to LDR.
/// Requires vfov in (10, 120) degrees and |pitch| <= 60 degrees.
CropImage crop_fov(const Image &pano_ep, double yaw, double pitch, double vfov,
                   int side = 256, const ToneMap &tm = {});

/// Ten deterministic views: yaw uniform in [0, 2pi), pitch uniform in
/// [-30, 30] degrees, fixed vfov.
std::vector<ViewParams> sample_views(uint64_t seed, int count = 10,
                                     double vfov_deg = 60.0);

std::vector<DataPair> make_pairs(const Image &pano_ep, const SphereMapping &mapping,
                                 uint64_t seed);

/// Procedural HDR panorama: ambient gradient, 1-4 bright area lights, and a
/// sinusoidal texture band. Deterministic per seed.
Image synth_panorama(uint64_t seed, int height = 128, int width = 256);

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct ManifestEntry {
    std::string path;   // relative to the manifest's directory
    std::string split;  // "train" or "test"
    std::vector<ViewParams> views;
};

struct Manifest {
    int version = 1;
    uint64_t seed = 0;
    double vfov_deg = 60.0;
    ToneMap tone_map;
    std::vector<ManifestEntry> entries;
};

Manifest make_manifest(const std::vector<std::string> &pano_paths, uint64_t seed,
                       double train_fraction, double vfov_deg = 60.0);
void save_manifest(const Manifest &m, const std::string &path);
Manifest load_manifest(const std::string &path);

/// A panorama with its square-map projection and manifest views.
struct PanoRecord {
    std::string path;
    Image ep;
    Image sp;
    std::vector<ViewParams> views;
};

/// Loads every entry of the given split ("train", "test", or "all").
std::vector<PanoRecord> load_split(const Manifest &m, const std::string &split,
                                   const SphereMapping &mapping,
                                   const std::string &base_dir);

/// Materializes one data pair from a loaded record.
DataPair make_pair(const PanoRecord &rec, int view_index, const ToneMap &tm = {});

}  // namespace vqtl

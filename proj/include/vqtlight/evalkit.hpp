// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "vqtlight/dataset.hpp"
#include "vqtlight/image.hpp"
#include "vqtlight/projection.hpp"

namespace vqtl {

enum class Material { kDiffuse, kMirror, kGlossy };

const char *material_name(Material m);

struct SphereRenderSpec {
    Material material = Material::kDiffuse;
    double phong_exponent = 32.0;  // glossy only; must be > 0
    int image_size = 128;
    std::array<float, 3> albedo = {1.0f, 1.0f, 1.0f};
    ToneMap tone_map;
};

/// Fixed direction quadrature on the sphere: one direction per face of a
/// subdivided icosahedron, weighted by exact spherical triangle area.
struct Quadrature {
    std::vector<Vec3> dirs;
    std::vector<double> weights;  // steradians; sums to 4*pi
};

Quadrature build_icosphere_quadrature(int level);

/// Shared level-5 quadrature (20480 directions), built once.
const Quadrature &ibl_quadrature();

/// Cosine-weighted irradiance of the environment about a normal, per
/// channel. Quadrature weights are renormalized per normal so a constant
/// environment c yields exactly pi*c.
std::array<double, 3> diffuse_irradiance(const Image &env_ep, const Vec3 &normal,
                                         const Quadrature &q);

/// Orthographic unit sphere under the environment; linear radiance, black
/// background. Diffuse uses albedo/pi * irradiance, mirror samples the
/// reflected ray, glossy averages a deterministic Phong-lobe grid.
Image render_sphere_linear(const Image &env_ep, const SphereRenderSpec &spec);

/// render_sphere_linear followed by the dataset tone map (self exposure).
Image render_sphere(const Image &env_ep, const SphereRenderSpec &spec);

/// Composite evaluation scene: diffuse, mirror, and glossy spheres over a
/// diffuse ground quad, camera pitched down 20 degrees. Linear radiance.
Image render_scene_linear(const Image &env_ep, int image_size,
                          double glossy_exponent = 32.0);

/// Root mean squared pixel difference.
double rmse(const Image &a, const Image &b);

/// Mean local structural similarity: 11x11 Gaussian window (sigma 1.5),
/// stabilizers (0.01*L)^2 and (0.03*L)^2 with L=1, windows clipped and
/// renormalized at borders, averaged over pixels and channels.
double ssim(const Image &a, const Image &b);

/// Mean angle in degrees between per-pixel RGB vectors. Pixels where both
/// norms are below 1e-6 are skipped; one-sided zeros count 90 degrees.
double angular_error_deg(const Image &a, const Image &b);

struct MetricsRecord {
    double rmse = 0;
    double ssim = 0;
    double angular_deg = 0;
    struct Entry {
        std::string material;
        double rmse = 0, ssim = 0, angular_deg = 0;
    };
    std::vector<Entry> per_material;
};

/// Renders the composite scene under both panoramas with a shared exposure
/// derived from the ground-truth render, computes the metric triple on the
/// pair, and repeats per material. RMSE/SSIM use the tone-mapped renders;
/// angular error uses the linear renders.
MetricsRecord evaluate_pair(const Image &pred_ep, const Image &gt_ep,
                            int image_size = 128);

}  // namespace vqtl

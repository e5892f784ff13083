// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#include "vqtlight/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vqtl {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Exact spherical triangle solid angle (Van Oosterom & Strackee).
double triangle_solid_angle(const Vec3 &a, const Vec3 &b, const Vec3 &c) {
    const double num = std::abs(a.dot(b.cross(c)));
    const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    return 2.0 * std::atan2(num, den);
}

void subdivide(const Vec3 &a, const Vec3 &b, const Vec3 &c, int depth, Quadrature *q) {
    if (depth == 0) {
        q->dirs.push_back((a + b + c).normalized());
        q->weights.push_back(triangle_solid_angle(a, b, c));
        return;
    }
    const Vec3 ab = (a + b).normalized();
    const Vec3 bc = (b + c).normalized();
    const Vec3 ca = (c + a).normalized();
    subdivide(a, ab, ca, depth - 1, q);
    subdivide(ab, b, bc, depth - 1, q);
    subdivide(ca, bc, c, depth - 1, q);
    subdivide(ab, bc, ca, depth - 1, q);
}

void env_sample(const Image &env, const Vec3 &dir, float out[3]) {
    double fx = 0, fy = 0;
    ep_coords_from_dir(dir, env.h, env.w, &fx, &fy);
    bilinear_wrap_x(env, fx, fy, out);
}

/// Orthonormal frame around a unit vector.
void basis(const Vec3 &n, Vec3 *t1, Vec3 *t2) {
    const Vec3 helper = std::abs(n.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    *t1 = n.cross(helper).normalized();
    *t2 = n.cross(*t1);
}

// Deterministic Phong-lobe grid: theta strata follow the exact lobe CDF, so
// the plain average of samples integrates the normalized lobe.
constexpr int kLobeTheta = 32;
constexpr int kLobePhi = 64;

std::array<double, 3> glossy_lobe(const Image &env, const Vec3 &reflect, double exponent) {
    Vec3 t1, t2;
    basis(reflect, &t1, &t2);
    std::array<double, 3> acc = {0, 0, 0};
    float rgb[3];
    for (int i = 0; i < kLobeTheta; ++i) {
        const double u = (i + 0.5) / kLobeTheta;
        const double ct = std::pow(u, 1.0 / (exponent + 1.0));
        const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        for (int j = 0; j < kLobePhi; ++j) {
            const double phi = 2.0 * kPi * (j + 0.5) / kLobePhi;
            const Vec3 d = t1 * (st * std::cos(phi)) + t2 * (st * std::sin(phi)) + reflect * ct;
            env_sample(env, d, rgb);
            for (int c = 0; c < 3; ++c) acc[c] += rgb[c];
        }
    }
    const double inv = 1.0 / (static_cast<double>(kLobeTheta) * kLobePhi);
    for (double &v : acc) v *= inv;
    return acc;
}

std::array<double, 3> shade_point(const Image &env, const Vec3 &normal, const Vec3 &view_dir,
                                  Material material, const std::array<float, 3> &albedo,
                                  double exponent, const Quadrature &q) {
    std::array<double, 3> out = {0, 0, 0};
    if (material == Material::kDiffuse) {
        const std::array<double, 3> e = diffuse_irradiance(env, normal, q);
        for (int c = 0; c < 3; ++c) out[c] = albedo[c] / kPi * e[c];
        return out;
    }
    const Vec3 reflect = view_dir - normal * (2.0 * view_dir.dot(normal));
    if (material == Material::kMirror) {
        float rgb[3];
        env_sample(env, reflect, rgb);
        for (int c = 0; c < 3; ++c) out[c] = albedo[c] * rgb[c];
        return out;
    }
    const std::array<double, 3> lobe = glossy_lobe(env, reflect, exponent);
    for (int c = 0; c < 3; ++c) out[c] = albedo[c] * lobe[c];
    return out;
}

void check_spec(const SphereRenderSpec &spec) {
    if (spec.image_size < 8) throw std::invalid_argument("render_sphere: image size too small");
    if (spec.material == Material::kGlossy && !(spec.phong_exponent > 0))
        throw std::invalid_argument("render_sphere: phong exponent must be positive");
    for (float a : spec.albedo)
        if (!(a >= 0.0f && a <= 1.0f))
            throw std::invalid_argument("render_sphere: albedo outside [0, 1]");
}

void check_same_shape(const Image &a, const Image &b, const char *what) {
    if (a.h != b.h || a.w != b.w || a.c != b.c)
        throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace

const char *material_name(Material m) {
    switch (m) {
        case Material::kDiffuse: return "diffuse";
        case Material::kMirror: return "mirror";
        case Material::kGlossy: return "glossy";
    }
    return "unknown";
}

Quadrature build_icosphere_quadrature(int level) {
    if (level < 0 || level > 7) throw std::invalid_argument("quadrature level out of range");
    const double p = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {
        {-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0},
        {0, -1, p}, {0, 1, p}, {0, -1, -p}, {0, 1, -p},
        {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1},
    };
    for (Vec3 &x : v) x = x.normalized();
    const int faces[20][3] = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
    };
    Quadrature q;
    q.dirs.reserve(static_cast<size_t>(20) << (2 * level));
    q.weights.reserve(q.dirs.capacity());
    for (const auto &f : faces) subdivide(v[f[0]], v[f[1]], v[f[2]], level, &q);
    return q;
}

const Quadrature &ibl_quadrature() {
    static const Quadrature q = build_icosphere_quadrature(5);
    return q;
}

std::array<double, 3> diffuse_irradiance(const Image &env_ep, const Vec3 &normal,
                                         const Quadrature &q) {
    std::array<double, 3> acc = {0, 0, 0};
    double wsum = 0;
    float rgb[3];
    for (size_t i = 0; i < q.dirs.size(); ++i) {
        const double c = q.dirs[i].dot(normal);
        if (c <= 0) continue;
        const double w = q.weights[i] * c;
        env_sample(env_ep, q.dirs[i], rgb);
        for (int ch = 0; ch < 3; ++ch) acc[ch] += w * rgb[ch];
        wsum += w;
    }
    if (wsum <= 0) return {0, 0, 0};
    const double scale = kPi / wsum;
    for (double &v : acc) v *= scale;
    return acc;
}

Image render_sphere_linear(const Image &env_ep, const SphereRenderSpec &spec) {
    validate_ep(env_ep, "render_sphere environment");
    check_spec(spec);
    const Quadrature &q = ibl_quadrature();
    const int s = spec.image_size;
    const Vec3 view_dir{-1, 0, 0};
    Image out(s, s, 3);
    for (int y = 0; y < s; ++y) {
        const double v = 1.0 - (y + 0.5) / s * 2.0;
        for (int x = 0; x < s; ++x) {
            const double u = (x + 0.5) / s * 2.0 - 1.0;
            const double rr = u * u + v * v;
            if (rr > 1.0) continue;
            const Vec3 normal{std::sqrt(1.0 - rr), u, v};
            const std::array<double, 3> c = shade_point(env_ep, normal, view_dir, spec.material,
                                                        spec.albedo, spec.phong_exponent, q);
            for (int ch = 0; ch < 3; ++ch)
                out.at(y, x, ch) = static_cast<float>(std::max(0.0, c[ch]));
        }
    }
    return out;
}

Image render_sphere(const Image &env_ep, const SphereRenderSpec &spec) {
    return tone_map(render_sphere_linear(env_ep, spec), spec.tone_map);
}

Image render_scene_linear(const Image &env_ep, int image_size, double glossy_exponent) {
    validate_ep(env_ep, "render_scene environment");
    if (image_size < 8) throw std::invalid_argument("render_scene: image size too small");
    if (!(glossy_exponent > 0))
        throw std::invalid_argument("render_scene: phong exponent must be positive");
    const Quadrature &q = ibl_quadrature();

    // Camera pitched 20 degrees down; orthographic, half extent 3.2.
    const double pitch = 20.0 * kPi / 180.0;
    const Vec3 d{-std::cos(pitch), 0, -std::sin(pitch)};
    const Vec3 right{0, 1, 0};
    const Vec3 up{-std::sin(pitch), 0, std::cos(pitch)};
    const double half = 3.2;

    const double sphere_r = 0.8;
    const Vec3 centers[3] = {{0, -1.8, -0.2}, {0, 0, -0.2}, {0, 1.8, -0.2}};
    const Material mats[3] = {Material::kDiffuse, Material::kMirror, Material::kGlossy};
    const std::array<float, 3> white = {1.0f, 1.0f, 1.0f};
    const std::array<float, 3> ground_albedo = {0.8f, 0.8f, 0.8f};

    Image out(image_size, image_size, 3);
    for (int y = 0; y < image_size; ++y) {
        const double sv = 1.0 - (y + 0.5) / image_size * 2.0;
        for (int x = 0; x < image_size; ++x) {
            const double su = (x + 0.5) / image_size * 2.0 - 1.0;
            const Vec3 origin = right * (su * half) + up * (sv * half) - d * 10.0;

            double best_t = 1e300;
            Vec3 normal;
            Material mat = Material::kDiffuse;
            std::array<float, 3> albedo = white;
            for (int i = 0; i < 3; ++i) {
                const Vec3 oc = origin - centers[i];
                const double b = oc.dot(d);
                const double disc = b * b - (oc.dot(oc) - sphere_r * sphere_r);
                if (disc < 0) continue;
                const double t = -b - std::sqrt(disc);
                if (t > 0 && t < best_t) {
                    best_t = t;
                    normal = (origin + d * t - centers[i]) * (1.0 / sphere_r);
                    mat = mats[i];
                    albedo = white;
                }
            }
            if (d.z != 0) {
                const double t = (-1.0 - origin.z) / d.z;
                if (t > 0 && t < best_t) {
                    const Vec3 p = origin + d * t;
                    if (std::abs(p.x) <= 4.0 && std::abs(p.y) <= 4.0) {
                        best_t = t;
                        normal = {0, 0, 1};
                        mat = Material::kDiffuse;
                        albedo = ground_albedo;
                    }
                }
            }
            if (best_t >= 1e300) continue;
            const std::array<double, 3> c =
                shade_point(env_ep, normal, d, mat, albedo, glossy_exponent, q);
            for (int ch = 0; ch < 3; ++ch)
                out.at(y, x, ch) = static_cast<float>(std::max(0.0, c[ch]));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

double rmse(const Image &a, const Image &b) {
    check_same_shape(a, b, "rmse");
    double acc = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.data.size()));
}

double ssim(const Image &a, const Image &b) {
    check_same_shape(a, b, "ssim");
    constexpr int kRadius = 5;  // 11x11 window
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;  // (0.01 * L)^2, L = 1
    constexpr double kC2 = 0.03 * 0.03;
    double kernel[2 * kRadius + 1][2 * kRadius + 1];
    for (int dy = -kRadius; dy <= kRadius; ++dy)
        for (int dx = -kRadius; dx <= kRadius; ++dx)
            kernel[dy + kRadius][dx + kRadius] =
                std::exp(-(dy * dy + dx * dx) / (2.0 * kSigma * kSigma));

    double total = 0;
    for (int ch = 0; ch < a.c; ++ch) {
        double channel = 0;
        for (int y = 0; y < a.h; ++y) {
            for (int x = 0; x < a.w; ++x) {
                double wsum = 0, mx = 0, my = 0;
                for (int dy = -kRadius; dy <= kRadius; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= a.h) continue;
                    for (int dx = -kRadius; dx <= kRadius; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= a.w) continue;
                        const double w = kernel[dy + kRadius][dx + kRadius];
                        wsum += w;
                        mx += w * a.at(yy, xx, ch);
                        my += w * b.at(yy, xx, ch);
                    }
                }
                mx /= wsum;
                my /= wsum;
                double vx = 0, vy = 0, cov = 0;
                for (int dy = -kRadius; dy <= kRadius; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= a.h) continue;
                    for (int dx = -kRadius; dx <= kRadius; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= a.w) continue;
                        const double w = kernel[dy + kRadius][dx + kRadius] / wsum;
                        const double da = a.at(yy, xx, ch) - mx;
                        const double db = b.at(yy, xx, ch) - my;
                        // Products are formed before the weight so the
                        // expression rounds identically under argument swap.
                        vx += (da * da) * w;
                        vy += (db * db) * w;
                        cov += (da * db) * w;
                    }
                }
                const double num = (2.0 * mx * my + kC1) * (2.0 * cov + kC2);
                const double den = (mx * mx + my * my + kC1) * (vx + vy + kC2);
                channel += num / den;
            }
        }
        total += channel / (static_cast<double>(a.h) * a.w);
    }
    return total / a.c;
}

double angular_error_deg(const Image &a, const Image &b) {
    check_same_shape(a, b, "angular_error");
    if (a.c != 3) throw std::invalid_argument("angular_error: expected 3 channels");
    constexpr double kZero = 1e-6;
    double acc = 0;
    int64_t count = 0;
    for (int y = 0; y < a.h; ++y) {
        for (int x = 0; x < a.w; ++x) {
            double na2 = 0, nb2 = 0, dot = 0;
            for (int ch = 0; ch < 3; ++ch) {
                const double va = a.at(y, x, ch), vb = b.at(y, x, ch);
                na2 += va * va;
                nb2 += vb * vb;
                dot += va * vb;
            }
            if (na2 < kZero * kZero && nb2 < kZero * kZero) continue;
            ++count;
            if (na2 < kZero * kZero || nb2 < kZero * kZero) {
                acc += 90.0;
                continue;
            }
            // Equal pixels give dot == na2 == nb2; skip the sqrt rounding so
            // identical images report exactly zero.
            if (dot == na2 && dot == nb2) continue;
            const double cosang = std::clamp(dot / (std::sqrt(na2) * std::sqrt(nb2)), -1.0, 1.0);
            acc += std::acos(cosang) * 180.0 / kPi;
        }
    }
    return count == 0 ? 0.0 : acc / static_cast<double>(count);
}

MetricsRecord evaluate_pair(const Image &pred_ep, const Image &gt_ep, int image_size) {
    check_same_shape(pred_ep, gt_ep, "evaluate_pair");
    validate_ep(pred_ep, "evaluate_pair prediction");
    validate_ep(gt_ep, "evaluate_pair ground truth");

    const ToneMap tm;
    auto metric_triple = [&](const Image &pred_lin, const Image &gt_lin, double *out_rmse,
                             double *out_ssim, double *out_ang) {
        // Shared exposure from the ground-truth render keeps the comparison
        // about lighting, not auto-exposure.
        const double exposure = tone_map_exposure(gt_lin, tm);
        const Image pred_ldr = tone_map_fixed(pred_lin, exposure, tm.gamma);
        const Image gt_ldr = tone_map_fixed(gt_lin, exposure, tm.gamma);
        *out_rmse = rmse(pred_ldr, gt_ldr);
        *out_ssim = ssim(pred_ldr, gt_ldr);
        *out_ang = angular_error_deg(pred_lin, gt_lin);
    };

    MetricsRecord rec;
    {
        const Image pred_lin = render_scene_linear(pred_ep, image_size);
        const Image gt_lin = render_scene_linear(gt_ep, image_size);
        metric_triple(pred_lin, gt_lin, &rec.rmse, &rec.ssim, &rec.angular_deg);
    }
    for (Material m : {Material::kDiffuse, Material::kMirror, Material::kGlossy}) {
        SphereRenderSpec spec;
        spec.material = m;
        spec.image_size = image_size;
        const Image pred_lin = render_sphere_linear(pred_ep, spec);
        const Image gt_lin = render_sphere_linear(gt_ep, spec);
        MetricsRecord::Entry entry;
        entry.material = material_name(m);
        metric_triple(pred_lin, gt_lin, &entry.rmse, &entry.ssim, &entry.angular_deg);
        rec.per_material.push_back(entry);
    }
    return rec;
}

}  // namespace vqtl

// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "vqtlight/image.hpp"

namespace vqtl {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3 &o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3 &o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3 &o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3 &o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        const double n = norm();
        return {x / n, y / n, z / n};
    }
};

// Conventions: z is up. Longitude lambda in [0, 2pi) maps to equirectangular
// columns left to right, latitude phi in [-pi/2, pi/2] maps to rows with the
// north pole at row 0. The square map places the north pole at the center of
// the square and the south pole at the corners.

/// Unit direction for longitude/latitude.
inline Vec3 dir_from_latlon(double lambda, double phi) {
    const double cp = std::cos(phi);
    return {cp * std::cos(lambda), cp * std::sin(lambda), std::sin(phi)};
}

/// Unit direction at the center of equirectangular pixel (row, col).
Vec3 ep_pixel_dir(int row, int col, int h, int w);

/// Fractional equirectangular pixel coordinates for a unit direction.
/// fx wraps in [−0.5, w−0.5); fy is clamped by the sampler.
void ep_coords_from_dir(const Vec3 &d, int h, int w, double *fx, double *fy);

/// Equal-area square -> sphere bijection (octahedral layout, closed form).
/// s, t in [0, 1].
Vec3 square_to_sphere(double s, double t);

/// Exact inverse of square_to_sphere. Returns (s, t) in [0, 1].
void sphere_to_square(const Vec3 &d, double *s, double *t);

/// Precomputed geometry for one square-map side length: per-pixel directions,
/// per-pixel solid angles, and the inverse lookup table used when resampling
/// back to an equirectangular grid of the native size (h = side, w = 2*side).
struct SphereMapping {
    int side = 0;
    std::vector<Vec3> directions;        // side*side, row-major
    std::vector<double> solid_angles;    // side*side, steradians
    std::vector<float> inverse_lut;      // side * 2*side * 2 (sx, sy)

    const Vec3 &dir(int row, int col) const { return directions[static_cast<size_t>(row) * side + col]; }
    double omega(int row, int col) const { return solid_angles[static_cast<size_t>(row) * side + col]; }
};

/// Builds the mapping for a given side length. side must be even and >= 4.
/// Deterministic; the result is immutable and safe to share across threads.
SphereMapping build_mapping(int side);

/// Resamples an equirectangular panorama onto the square equal-area grid.
Image ep_to_sp(const Image &src, const SphereMapping &m);

/// Resamples a square equal-area map back to an equirectangular panorama of
/// out_h rows (out_h x 2*out_h x 3).
Image sp_to_ep(const Image &src, const SphereMapping &m, int out_h);

/// Solid angle of equirectangular pixel row (exact: delta_lambda * delta_sin_phi).
double ep_row_solid_angle(int row, int h, int w);

/// Solid-angle-weighted total radiance, summed over channels.
double ep_total_energy(const Image &ep);
double sp_total_energy(const Image &sp, const SphereMapping &m);

}  // namespace vqtl

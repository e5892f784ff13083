// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#include "vqtlight/projection.hpp"

#include <algorithm>
#include <stdexcept>

namespace vqtl {

Vec3 ep_pixel_dir(int row, int col, int h, int w) {
    const double lambda = 2.0 * M_PI * (col + 0.5) / w;
    const double phi = M_PI_2 - M_PI * (row + 0.5) / h;
    return dir_from_latlon(lambda, phi);
}

void ep_coords_from_dir(const Vec3 &d, int h, int w, double *fx, double *fy) {
    double lambda = std::atan2(d.y, d.x);
    if (lambda < 0.0) lambda += 2.0 * M_PI;
    const double phi = std::asin(std::clamp(d.z, -1.0, 1.0));
    *fx = lambda / (2.0 * M_PI) * w - 0.5;
    *fy = (0.5 - phi / M_PI) * h - 0.5;
}

Vec3 square_to_sphere(double s, double t) {
    const double u = 2.0 * s - 1.0;
    const double v = 2.0 * t - 1.0;
    const double up = std::abs(u);
    const double vp = std::abs(v);

    // Signed distance from the |u|+|v|=1 diagonal; the inner diamond covers
    // the northern hemisphere, the four outer triangles the southern one.
    const double sd = 1.0 - (up + vp);
    const double d = std::abs(sd);
    const double r = 1.0 - d;

    const double phi = (r == 0.0 ? 1.0 : (vp - up) / r + 1.0) * M_PI / 4.0;
    const double z = std::copysign(1.0 - r * r, sd);
    const double cos_phi = std::copysign(std::cos(phi), u);
    const double sin_phi = std::copysign(std::sin(phi), v);
    const double rho = r * std::sqrt(2.0 - r * r);
    return {cos_phi * rho, sin_phi * rho, z};
}

void sphere_to_square(const Vec3 &d, double *s, double *t) {
    const double ax = std::abs(d.x);
    const double ay = std::abs(d.y);
    const double az = std::clamp(std::abs(d.z), 0.0, 1.0);

    const double r = std::sqrt(1.0 - az);
    // Octant angle in [0, pi/2]; arbitrary at the poles where r == 0.
    const double phi = (ax == 0.0 && ay == 0.0) ? 0.0 : std::atan2(ay, ax);
    const double f = 2.0 * phi / M_PI;  // in [0, 1]

    double up, vp;
    if (d.z >= 0.0) {
        vp = f * r;
        up = r - vp;
    } else {
        vp = 1.0 - r + f * r;
        up = 1.0 - f * r;
    }
    const double u = std::copysign(up, d.x);
    const double v = std::copysign(vp, d.y);
    *s = 0.5 * (u + 1.0);
    *t = 0.5 * (v + 1.0);
}

namespace {

// Solid angle of the geodesic triangle (a, b, c) via Van Oosterom-Strackee.
double triangle_solid_angle(const Vec3 &a, const Vec3 &b, const Vec3 &c) {
    const double num = a.dot(b.cross(c));
    const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    return 2.0 * std::atan2(num, den);
}

// Solid angle subtended by the spherical image of one square pixel. The
// pixel boundary is subdivided before mapping so the geodesic polygon tracks
// the curved image closely even across the octant seams.
double pixel_solid_angle(int row, int col, int side) {
    constexpr int kEdgeSubdiv = 8;
    const double inv = 1.0 / side;
    const double s0 = col * inv, s1 = (col + 1) * inv;
    const double t0 = row * inv, t1 = (row + 1) * inv;

    std::vector<Vec3> boundary;
    boundary.reserve(4 * kEdgeSubdiv);
    for (int k = 0; k < kEdgeSubdiv; ++k) {
        const double a = static_cast<double>(k) / kEdgeSubdiv;
        boundary.push_back(square_to_sphere(s0 + (s1 - s0) * a, t0));
    }
    for (int k = 0; k < kEdgeSubdiv; ++k) {
        const double a = static_cast<double>(k) / kEdgeSubdiv;
        boundary.push_back(square_to_sphere(s1, t0 + (t1 - t0) * a));
    }
    for (int k = 0; k < kEdgeSubdiv; ++k) {
        const double a = static_cast<double>(k) / kEdgeSubdiv;
        boundary.push_back(square_to_sphere(s1 - (s1 - s0) * a, t1));
    }
    for (int k = 0; k < kEdgeSubdiv; ++k) {
        const double a = static_cast<double>(k) / kEdgeSubdiv;
        boundary.push_back(square_to_sphere(s0, t1 - (t1 - t0) * a));
    }

    const Vec3 center = square_to_sphere(0.5 * (s0 + s1), 0.5 * (t0 + t1));
    double omega = 0.0;
    for (size_t i = 0; i < boundary.size(); ++i) {
        const Vec3 &p = boundary[i];
        const Vec3 &q = boundary[(i + 1) % boundary.size()];
        omega += triangle_solid_angle(center, p, q);
    }
    return std::abs(omega);
}

}  // namespace

SphereMapping build_mapping(int side) {
    if (side < 4 || side % 2 != 0)
        throw std::invalid_argument("build_mapping: side must be even and >= 4, got " +
                                    std::to_string(side));

    SphereMapping m;
    m.side = side;
    m.directions.resize(static_cast<size_t>(side) * side);
    m.solid_angles.resize(static_cast<size_t>(side) * side);

    for (int row = 0; row < side; ++row) {
        for (int col = 0; col < side; ++col) {
            const double s = (col + 0.5) / side;
            const double t = (row + 0.5) / side;
            m.directions[static_cast<size_t>(row) * side + col] = square_to_sphere(s, t);
            m.solid_angles[static_cast<size_t>(row) * side + col] =
                pixel_solid_angle(row, col, side);
        }
    }

    const int eh = side, ew = 2 * side;
    m.inverse_lut.resize(static_cast<size_t>(eh) * ew * 2);
    for (int row = 0; row < eh; ++row) {
        for (int col = 0; col < ew; ++col) {
            double s, t;
            sphere_to_square(ep_pixel_dir(row, col, eh, ew), &s, &t);
            m.inverse_lut[(static_cast<size_t>(row) * ew + col) * 2 + 0] =
                static_cast<float>(s * side - 0.5);
            m.inverse_lut[(static_cast<size_t>(row) * ew + col) * 2 + 1] =
                static_cast<float>(t * side - 0.5);
        }
    }
    return m;
}

Image ep_to_sp(const Image &src, const SphereMapping &m) {
    validate_ep(src, "ep_to_sp input");
    if (m.side <= 0) throw std::invalid_argument("ep_to_sp: mapping not built");

    Image out(m.side, m.side, 3);
    float px[3];
    for (int row = 0; row < m.side; ++row) {
        for (int col = 0; col < m.side; ++col) {
            double fx, fy;
            ep_coords_from_dir(m.dir(row, col), src.h, src.w, &fx, &fy);
            bilinear_wrap_x(src, fx, fy, px);
            for (int ch = 0; ch < 3; ++ch) out.at(row, col, ch) = px[ch];
        }
    }
    return out;
}

Image sp_to_ep(const Image &src, const SphereMapping &m, int out_h) {
    validate_sp(src, "sp_to_ep input");
    if (src.h != m.side)
        throw std::invalid_argument("sp_to_ep: map side " + std::to_string(src.h) +
                                    " does not match mapping side " + std::to_string(m.side));
    if (out_h < 2) throw std::invalid_argument("sp_to_ep: out_h must be >= 2");

    const int ew = 2 * out_h;
    const bool use_lut = (out_h == m.side);
    Image out(out_h, ew, 3);
    float px[3];
    for (int row = 0; row < out_h; ++row) {
        for (int col = 0; col < ew; ++col) {
            double sx, sy;
            if (use_lut) {
                sx = m.inverse_lut[(static_cast<size_t>(row) * ew + col) * 2 + 0];
                sy = m.inverse_lut[(static_cast<size_t>(row) * ew + col) * 2 + 1];
            } else {
                double s, t;
                sphere_to_square(ep_pixel_dir(row, col, out_h, ew), &s, &t);
                sx = s * m.side - 0.5;
                sy = t * m.side - 0.5;
            }
            bilinear_clamp(src, sx, sy, px);
            for (int ch = 0; ch < 3; ++ch) out.at(row, col, ch) = px[ch];
        }
    }
    return out;
}

double ep_row_solid_angle(int row, int h, int w) {
    const double phi_top = M_PI_2 - M_PI * row / h;
    const double phi_bot = M_PI_2 - M_PI * (row + 1) / h;
    return (2.0 * M_PI / w) * (std::sin(phi_top) - std::sin(phi_bot));
}

double ep_total_energy(const Image &ep) {
    double total = 0.0;
    for (int row = 0; row < ep.h; ++row) {
        const double omega = ep_row_solid_angle(row, ep.h, ep.w);
        double row_sum = 0.0;
        for (int col = 0; col < ep.w; ++col)
            for (int ch = 0; ch < 3; ++ch) row_sum += ep.at(row, col, ch);
        total += omega * row_sum;
    }
    return total;
}

double sp_total_energy(const Image &sp, const SphereMapping &m) {
    double total = 0.0;
    for (int row = 0; row < sp.h; ++row)
        for (int col = 0; col < sp.w; ++col) {
            const double omega = m.omega(row, col);
            total += omega * (sp.at(row, col, 0) + sp.at(row, col, 1) + sp.at(row, col, 2));
        }
    return total;
}

}  // namespace vqtl

// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#include "vqtlight/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vqtl {

bool Image::all_finite() const {
    for (float v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

bool Image::all_nonnegative() const {
    for (float v : data) {
        if (v < 0.0f) return false;
    }
    return true;
}

float Image::min_value() const {
    float m = std::numeric_limits<float>::infinity();
    for (float v : data) m = std::min(m, v);
    return m;
}

float Image::max_value() const {
    float m = -std::numeric_limits<float>::infinity();
    for (float v : data) m = std::max(m, v);
    return m;
}

void validate_ep(const Image &img, const std::string &what) {
    if (img.empty()) throw std::invalid_argument(what + ": empty image");
    if (img.c != 3) throw std::invalid_argument(what + ": expected 3 channels");
    if (img.w != 2 * img.h)
        throw std::invalid_argument(what + ": equirectangular maps require W = 2*H, got " +
                                    std::to_string(img.h) + "x" + std::to_string(img.w));
    if (!img.all_finite()) throw std::invalid_argument(what + ": non-finite pixel value");
    if (!img.all_nonnegative()) throw std::invalid_argument(what + ": negative pixel value");
}

void validate_sp(const Image &img, const std::string &what) {
    if (img.empty()) throw std::invalid_argument(what + ": empty image");
    if (img.c != 3) throw std::invalid_argument(what + ": expected 3 channels");
    if (img.w != img.h)
        throw std::invalid_argument(what + ": square maps require H = W, got " +
                                    std::to_string(img.h) + "x" + std::to_string(img.w));
    if (!img.all_finite()) throw std::invalid_argument(what + ": non-finite pixel value");
    if (!img.all_nonnegative()) throw std::invalid_argument(what + ": negative pixel value");
}

namespace {

inline int wrap_index(int i, int n) {
    i %= n;
    return i < 0 ? i + n : i;
}

inline int clamp_index(int i, int n) {
    return std::clamp(i, 0, n - 1);
}

}  // namespace

void bilinear_wrap_x(const Image &img, double fx, double fy, float *out) {
    const int x0f = static_cast<int>(std::floor(fx));
    const int y0f = static_cast<int>(std::floor(fy));
    const double ax = fx - x0f;
    const double ay = fy - y0f;
    const int x0 = wrap_index(x0f, img.w);
    const int x1 = wrap_index(x0f + 1, img.w);
    const int y0 = clamp_index(y0f, img.h);
    const int y1 = clamp_index(y0f + 1, img.h);
    for (int ch = 0; ch < img.c; ++ch) {
        const double top = (1.0 - ax) * img.at(y0, x0, ch) + ax * img.at(y0, x1, ch);
        const double bot = (1.0 - ax) * img.at(y1, x0, ch) + ax * img.at(y1, x1, ch);
        out[ch] = static_cast<float>((1.0 - ay) * top + ay * bot);
    }
}

void bilinear_clamp(const Image &img, double fx, double fy, float *out) {
    const int x0f = static_cast<int>(std::floor(fx));
    const int y0f = static_cast<int>(std::floor(fy));
    const double ax = fx - x0f;
    const double ay = fy - y0f;
    const int x0 = clamp_index(x0f, img.w);
    const int x1 = clamp_index(x0f + 1, img.w);
    const int y0 = clamp_index(y0f, img.h);
    const int y1 = clamp_index(y0f + 1, img.h);
    for (int ch = 0; ch < img.c; ++ch) {
        const double top = (1.0 - ax) * img.at(y0, x0, ch) + ax * img.at(y0, x1, ch);
        const double bot = (1.0 - ax) * img.at(y1, x0, ch) + ax * img.at(y1, x1, ch);
        out[ch] = static_cast<float>((1.0 - ay) * top + ay * bot);
    }
}

float percentile(const std::vector<float> &values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile: empty input");
    std::vector<float> sorted(values);
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return static_cast<float>((1.0 - frac) * sorted[lo] + frac * sorted[hi]);
}

double Rng::normal() {
    // Box-Muller, discarding the second variate.
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace vqtl

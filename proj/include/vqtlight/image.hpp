// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace vqtl {

/// Row-major H x W x C float image, channels interleaved.
/// Radiance images store linear values; LDR images store [0,1].
struct Image {
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<float> data;

    Image() = default;
    Image(int h_, int w_, int c_, float fill = 0.0f)
        : h(h_), w(w_), c(c_), data(static_cast<size_t>(h_) * w_ * c_, fill) {}

    float &at(int y, int x, int ch) {
        return data[(static_cast<size_t>(y) * w + x) * c + ch];
    }
    float at(int y, int x, int ch) const {
        return data[(static_cast<size_t>(y) * w + x) * c + ch];
    }
    size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    bool all_finite() const;
    bool all_nonnegative() const;
    float min_value() const;
    float max_value() const;
};

/// Throws std::invalid_argument unless img is a valid equirectangular
/// panorama: W = 2*H, 3 channels, finite, nonnegative.
void validate_ep(const Image &img, const std::string &what = "panorama");

/// Throws std::invalid_argument unless img is a valid square map:
/// H = W, 3 channels, finite, nonnegative.
void validate_sp(const Image &img, const std::string &what = "square map");

/// Bilinear sample with x wraparound and y clamp (equirectangular
/// longitude/latitude convention). fx, fy are fractional pixel coords.
void bilinear_wrap_x(const Image &img, double fx, double fy, float *out);

/// Bilinear sample with clamp on both axes.
void bilinear_clamp(const Image &img, double fx, double fy, float *out);

/// Rec. 709 luminance.
inline float luminance(float r, float g, float b) {
    return 0.2126f * r + 0.7152f * g + 0.0722f * b;
}

/// Percentile with linear interpolation between order statistics.
/// q in [0,1]. Does not modify the input.
float percentile(const std::vector<float> &values, double q);

/// Deterministic random source. The raw engine is std::mt19937_64 but all
/// variate transforms are hand-rolled so streams are identical across
/// standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    /// Uniform in [0,1) with 53-bit resolution.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(uniform() * (static_cast<double>(hi) - lo + 1.0));
    }

    /// Standard normal via Box-Muller. One variate per call.
    double normal();

    uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

}  // namespace vqtl

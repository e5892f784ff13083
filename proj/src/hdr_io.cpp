// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#include "vqtlight/hdr_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vqtl {

namespace {

void float_to_rgbe(float r, float g, float b, unsigned char out[4]) {
    const float v = std::max({r, g, b});
    if (v < 1e-32f) {
        out[0] = out[1] = out[2] = out[3] = 0;
        return;
    }
    int e;
    const double m = std::frexp(static_cast<double>(v), &e);
    const double scale = m * 256.0 / v;
    out[0] = static_cast<unsigned char>(r * scale);
    out[1] = static_cast<unsigned char>(g * scale);
    out[2] = static_cast<unsigned char>(b * scale);
    out[3] = static_cast<unsigned char>(e + 128);
}

void rgbe_to_float(const unsigned char px[4], float *r, float *g, float *b) {
    if (px[3] == 0) {
        *r = *g = *b = 0.0f;
        return;
    }
    const double f = std::ldexp(1.0, static_cast<int>(px[3]) - (128 + 8));
    *r = static_cast<float>(px[0] * f);
    *g = static_cast<float>(px[1] * f);
    *b = static_cast<float>(px[2] * f);
}

void write_rle_component(std::ofstream &out, const std::vector<unsigned char> &line) {
    // Standard new-style RLE: runs of >= 4 identical bytes become
    // (128 + count, value); everything else is emitted as literal blocks.
    const size_t n = line.size();
    size_t pos = 0;
    while (pos < n) {
        size_t run_start = pos;
        size_t run_len = 1;
        // Find the next run of at least 4 equal bytes.
        while (run_start < n) {
            run_len = 1;
            while (run_start + run_len < n && run_len < 127 &&
                   line[run_start + run_len] == line[run_start])
                ++run_len;
            if (run_len >= 4) break;
            run_start += run_len;
        }
        // Emit literals up to the run.
        size_t lit = run_start - pos;
        while (lit > 0) {
            const size_t chunk = std::min<size_t>(lit, 128);
            out.put(static_cast<char>(chunk));
            out.write(reinterpret_cast<const char *>(line.data() + pos), static_cast<std::streamsize>(chunk));
            pos += chunk;
            lit -= chunk;
        }
        if (run_start < n && run_len >= 4) {
            out.put(static_cast<char>(128 + run_len));
            out.put(static_cast<char>(line[run_start]));
            pos = run_start + run_len;
        }
    }
}

bool read_exact(std::ifstream &in, unsigned char *dst, size_t n) {
    in.read(reinterpret_cast<char *>(dst), static_cast<std::streamsize>(n));
    return static_cast<size_t>(in.gcount()) == n;
}

}  // namespace

Image load_radiance_hdr(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_radiance_hdr: cannot open " + path);

    std::string line;
    if (!std::getline(in, line) || (line.rfind("#?RADIANCE", 0) != 0 && line.rfind("#?RGBE", 0) != 0))
        throw std::runtime_error("load_radiance_hdr: " + path + " is not a Radiance file");

    bool format_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) break;
        if (line.rfind("FORMAT=", 0) == 0) {
            if (line != "FORMAT=32-bit_rle_rgbe")
                throw std::runtime_error("load_radiance_hdr: unsupported " + line);
            format_seen = true;
        }
        // Comments and EXPOSURE/GAMMA lines are ignored.
    }
    if (!format_seen)
        throw std::runtime_error("load_radiance_hdr: missing FORMAT line in " + path);

    if (!std::getline(in, line))
        throw std::runtime_error("load_radiance_hdr: missing resolution line in " + path);
    int h = 0, w = 0;
    {
        std::istringstream res(line);
        std::string ytag, xtag;
        if (!(res >> ytag >> h >> xtag >> w) || ytag != "-Y" || xtag != "+X" || h <= 0 || w <= 0)
            throw std::runtime_error("load_radiance_hdr: unsupported resolution line '" + line + "'");
    }

    Image img(h, w, 3);
    std::vector<unsigned char> scan(static_cast<size_t>(w) * 4);
    for (int row = 0; row < h; ++row) {
        unsigned char head[4];
        if (!read_exact(in, head, 4))
            throw std::runtime_error("load_radiance_hdr: truncated file " + path);
        const bool new_rle =
            head[0] == 2 && head[1] == 2 && ((head[2] << 8) | head[3]) == w && w >= 8 && w < 32768;
        if (new_rle) {
            for (int comp = 0; comp < 4; ++comp) {
                int x = 0;
                while (x < w) {
                    unsigned char count;
                    if (!read_exact(in, &count, 1))
                        throw std::runtime_error("load_radiance_hdr: truncated RLE in " + path);
                    if (count > 128) {
                        unsigned char value;
                        if (!read_exact(in, &value, 1))
                            throw std::runtime_error("load_radiance_hdr: truncated RLE in " + path);
                        int run = count - 128;
                        if (x + run > w) throw std::runtime_error("load_radiance_hdr: RLE overrun in " + path);
                        for (int k = 0; k < run; ++k) scan[static_cast<size_t>(x++) * 4 + comp] = value;
                    } else {
                        int run = count;
                        if (run == 0 || x + run > w)
                            throw std::runtime_error("load_radiance_hdr: bad RLE count in " + path);
                        for (int k = 0; k < run; ++k) {
                            unsigned char value;
                            if (!read_exact(in, &value, 1))
                                throw std::runtime_error("load_radiance_hdr: truncated RLE in " + path);
                            scan[static_cast<size_t>(x++) * 4 + comp] = value;
                        }
                    }
                }
            }
        } else {
            // Flat scanline, possibly with old-style (1,1,1,count) repeats.
            std::memcpy(scan.data(), head, 4);
            int x = 1;
            int shift = 0;
            while (x < w) {
                unsigned char px[4];
                if (!read_exact(in, px, 4))
                    throw std::runtime_error("load_radiance_hdr: truncated file " + path);
                if (px[0] == 1 && px[1] == 1 && px[2] == 1) {
                    if (x == 0) throw std::runtime_error("load_radiance_hdr: bad repeat marker in " + path);
                    int run = px[3] << shift;
                    if (x + run > w) throw std::runtime_error("load_radiance_hdr: repeat overrun in " + path);
                    for (int k = 0; k < run; ++k) {
                        std::memcpy(scan.data() + static_cast<size_t>(x) * 4,
                                    scan.data() + static_cast<size_t>(x - 1) * 4, 4);
                        ++x;
                    }
                    shift += 8;
                } else {
                    std::memcpy(scan.data() + static_cast<size_t>(x) * 4, px, 4);
                    ++x;
                    shift = 0;
                }
            }
        }
        for (int x = 0; x < w; ++x) {
            float r, g, b;
            rgbe_to_float(scan.data() + static_cast<size_t>(x) * 4, &r, &g, &b);
            img.at(row, x, 0) = r;
            img.at(row, x, 1) = g;
            img.at(row, x, 2) = b;
        }
    }
    return img;
}

void save_radiance_hdr(const Image &img, const std::string &path) {
    if (img.c != 3) throw std::invalid_argument("save_radiance_hdr: expected 3 channels");
    if (!img.all_finite()) throw std::invalid_argument("save_radiance_hdr: non-finite pixel");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_radiance_hdr: cannot open " + path + " for writing");

    out << "#?RADIANCE\n";
    out << "FORMAT=32-bit_rle_rgbe\n\n";
    out << "-Y " << img.h << " +X " << img.w << "\n";

    const bool rle = img.w >= 8 && img.w < 32768;
    std::vector<unsigned char> comp[4];
    for (auto &v : comp) v.resize(img.w);
    for (int row = 0; row < img.h; ++row) {
        for (int x = 0; x < img.w; ++x) {
            unsigned char px[4];
            float_to_rgbe(img.at(row, x, 0), img.at(row, x, 1), img.at(row, x, 2), px);
            for (int k = 0; k < 4; ++k) comp[k][x] = px[k];
        }
        if (rle) {
            const unsigned char head[4] = {2, 2, static_cast<unsigned char>(img.w >> 8),
                                           static_cast<unsigned char>(img.w & 0xff)};
            out.write(reinterpret_cast<const char *>(head), 4);
            for (int k = 0; k < 4; ++k) write_rle_component(out, comp[k]);
        } else {
            for (int x = 0; x < img.w; ++x) {
                const unsigned char px[4] = {comp[0][x], comp[1][x], comp[2][x], comp[3][x]};
                out.write(reinterpret_cast<const char *>(px), 4);
            }
        }
    }
    if (!out) throw std::runtime_error("save_radiance_hdr: write failed for " + path);
}

Image load_raw_dump(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_raw_dump: cannot open " + path);

    std::string header;
    if (!std::getline(in, header))
        throw std::runtime_error("load_raw_dump: missing header in " + path);
    std::istringstream hs(header);
    std::string magic;
    int version = 0, h = 0, w = 0, c = 0;
    if (!(hs >> magic >> version >> h >> w >> c) || magic != "VQTL")
        throw std::runtime_error("load_raw_dump: bad header '" + header + "' in " + path);
    if (version != 1)
        throw std::runtime_error("load_raw_dump: unsupported version " + std::to_string(version));
    if (h <= 0 || w <= 0 || c <= 0)
        throw std::runtime_error("load_raw_dump: bad dimensions in " + path);

    static_assert(sizeof(float) == 4);
    Image img(h, w, c);
    in.read(reinterpret_cast<char *>(img.data.data()),
            static_cast<std::streamsize>(img.data.size() * 4));
    if (static_cast<size_t>(in.gcount()) != img.data.size() * 4)
        throw std::runtime_error("load_raw_dump: truncated payload in " + path);
    return img;
}

void save_raw_dump(const Image &img, const std::string &path) {
    if (img.empty()) throw std::invalid_argument("save_raw_dump: empty image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_raw_dump: cannot open " + path + " for writing");
    out << "VQTL 1 " << img.h << " " << img.w << " " << img.c << "\n";
    out.write(reinterpret_cast<const char *>(img.data.data()),
              static_cast<std::streamsize>(img.data.size() * 4));
    if (!out) throw std::runtime_error("save_raw_dump: write failed for " + path);
}

namespace {

bool has_suffix(const std::string &s, const std::string &suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Image load_image(const std::string &path) {
    if (has_suffix(path, ".hdr")) return load_radiance_hdr(path);
    if (has_suffix(path, ".vqtl")) return load_raw_dump(path);
    throw std::runtime_error("load_image: unsupported extension for " + path +
                             " (expected .hdr or .vqtl)");
}

void save_image(const Image &img, const std::string &path) {
    if (has_suffix(path, ".hdr")) {
        save_radiance_hdr(img, path);
    } else if (has_suffix(path, ".vqtl")) {
        save_raw_dump(img, path);
    } else {
        throw std::runtime_error("save_image: unsupported extension for " + path);
    }
}

Image load_panorama(const std::string &path) {
    Image img = load_image(path);
    validate_ep(img, "panorama " + path);
    return img;
}

void save_panorama(const Image &pano, const std::string &path) {
    validate_ep(pano, "panorama");
    save_image(pano, path);
}

}  // namespace vqtl

// Copyright Contributors to the vqtlight project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "vqtlight/image.hpp"

namespace vqtl {

// Two on-disk image formats are supported:
//  - Radiance RGBE (".hdr"), the interchange format. Lossy: each pixel is
//    quantized to a shared-exponent 8-bit mantissa triple.
//  - A raw float dump (".vqtl") used where tests need bit-exact storage.
//    Layout: one text header line "VQTL <version> <H> <W> <C>\n" followed by
//    H*W*C little-endian 32-bit floats, row-major, channels interleaved.

/// Reads a Radiance RGBE file. Supports flat scanlines, old-style run
/// markers, and new-style RLE. Only "-Y h +X w" orientation is accepted.
Image load_radiance_hdr(const std::string &path);

/// Writes a Radiance RGBE file with new-style RLE scanlines.
void save_radiance_hdr(const Image &img, const std::string &path);

Image load_raw_dump(const std::string &path);
void save_raw_dump(const Image &img, const std::string &path);

/// Dispatches on extension: ".hdr" -> RGBE, ".vqtl" -> raw dump.
Image load_image(const std::string &path);
void save_image(const Image &img, const std::string &path);

/// Loads an equirectangular HDR panorama and checks its contract
/// (2:1 aspect, 3 channels, finite, nonnegative).
Image load_panorama(const std::string &path);
void save_panorama(const Image &pano, const std::string &path);

}  // namespace vqtl

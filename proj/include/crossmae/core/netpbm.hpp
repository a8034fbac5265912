#pragma once

#include <string>

#include "crossmae/core/image.hpp"

namespace crossmae::img {

// Lossless netpbm raster I/O. Values in [0,1] are quantized to
// round(v * maxval) on write and divided by maxval on read.
//   .pgm (P5)  1 channel
//   .ppm (P6)  3 channels
//   .pam (P7)  any channel count (used for 4-channel RGB+NIR satellite files)
// bit_depth is 8 or 16; 16-bit samples are big-endian per the format spec.
void write_raster(const std::string& path, const Image& im, int bit_depth = 16);

// Reads P5/P6/P7, normalized to [0,1]. Rejects non-finite values (cannot
// occur for well-formed files) and unknown magic numbers.
Image read_raster(const std::string& path);

}  // namespace crossmae::img

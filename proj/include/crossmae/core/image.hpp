#pragma once

#include <vector>

namespace crossmae::img {

// Dense H x W x C raster, interleaved row-major (y, x, channel), values
// normally in [0,1] as double.
struct Image {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h_, int w_, int c_, double fill = 0.0)
      : h(h_), w(w_), c(c_), data(static_cast<size_t>(h_) * w_ * c_, fill) {}

  double& at(int y, int x, int ch) {
    return data[(static_cast<size_t>(y) * w + x) * c + ch];
  }
  double at(int y, int x, int ch) const {
    return data[(static_cast<size_t>(y) * w + x) * c + ch];
  }
  bool empty() const { return data.empty(); }
  size_t size() const { return data.size(); }
};

// Bilinear resampling with half-pixel-center convention:
// src = (dst + 0.5) * (in/out) - 0.5, clamped to the border.
Image resize_bilinear(const Image& in, int out_h, int out_w);

// Separable Gaussian blur, kernel radius ceil(3*sigma), clamp-to-edge.
// sigma <= 0 returns the input unchanged.
Image gaussian_blur(const Image& in, double sigma);

// Box-average downsample by an integer factor (trailing partial boxes use
// the pixels available).
Image downsample_box(const Image& in, int factor);

// Satellite-style degradation used by the synthetic data generator:
// blur, box-downsample by `factor`, then bilinear-upsample back to the
// original size.
Image degrade(const Image& in, double blur_sigma, int factor);

// Extract a channel as a 1-channel image / stack channels.
Image take_channels(const Image& in, int first, int count);

void clip01(Image& im);

}  // namespace crossmae::img

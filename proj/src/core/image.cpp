#include "crossmae/core/image.hpp"

#include <algorithm>
#include <cmath>

#include "crossmae/core/errors.hpp"

namespace crossmae::img {

Image resize_bilinear(const Image& in, int out_h, int out_w) {
  if (in.empty() || out_h <= 0 || out_w <= 0)
    throw InputError("resize_bilinear: empty input or non-positive output dims");
  if (out_h == in.h && out_w == in.w) return in;
  Image out(out_h, out_w, in.c);
  const double sy = static_cast<double>(in.h) / out_h;
  const double sx = static_cast<double>(in.w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(in.h - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, in.h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(in.w - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, in.w - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < in.c; ++ch) {
        const double top = in.at(y0, x0, ch) * (1.0 - wx) + in.at(y0, x1, ch) * wx;
        const double bot = in.at(y1, x0, ch) * (1.0 - wx) + in.at(y1, x1, ch) * wx;
        out.at(y, x, ch) = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

Image gaussian_blur(const Image& in, double sigma) {
  if (in.empty()) throw InputError("gaussian_blur: empty input");
  if (sigma <= 0.0) return in;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;

  Image tmp(in.h, in.w, in.c);
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x)
      for (int ch = 0; ch < in.c; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int xx = std::clamp(x + i, 0, in.w - 1);
          acc += k[i + radius] * in.at(y, xx, ch);
        }
        tmp.at(y, x, ch) = acc;
      }
  Image out(in.h, in.w, in.c);
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x)
      for (int ch = 0; ch < in.c; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int yy = std::clamp(y + i, 0, in.h - 1);
          acc += k[i + radius] * tmp.at(yy, x, ch);
        }
        out.at(y, x, ch) = acc;
      }
  return out;
}

Image downsample_box(const Image& in, int factor) {
  if (factor <= 0) throw InputError("downsample_box: factor must be positive");
  if (factor == 1) return in;
  const int oh = (in.h + factor - 1) / factor;
  const int ow = (in.w + factor - 1) / factor;
  Image out(oh, ow, in.c);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      const int y0 = y * factor, y1 = std::min(y0 + factor, in.h);
      const int x0 = x * factor, x1 = std::min(x0 + factor, in.w);
      const double n = static_cast<double>((y1 - y0) * (x1 - x0));
      for (int ch = 0; ch < in.c; ++ch) {
        double acc = 0.0;
        for (int yy = y0; yy < y1; ++yy)
          for (int xx = x0; xx < x1; ++xx) acc += in.at(yy, xx, ch);
        out.at(y, x, ch) = acc / n;
      }
    }
  return out;
}

Image degrade(const Image& in, double blur_sigma, int factor) {
  Image blurred = gaussian_blur(in, blur_sigma);
  Image low = downsample_box(blurred, factor);
  return resize_bilinear(low, in.h, in.w);
}

Image take_channels(const Image& in, int first, int count) {
  if (first < 0 || first + count > in.c)
    throw InputError("take_channels: channel range out of bounds");
  Image out(in.h, in.w, count);
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x)
      for (int ch = 0; ch < count; ++ch)
        out.at(y, x, ch) = in.at(y, x, first + ch);
  return out;
}

void clip01(Image& im) {
  for (double& v : im.data) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace crossmae::img

#include "crossmae/tokenizer/tokenizer.hpp"

#include <cmath>

#include "crossmae/core/errors.hpp"

namespace crossmae::tokenizer {

void PatchGeometry::validate() const {
  if (image_size <= 0 || patch_size <= 0 || channels <= 0)
    throw ConfigError("tokenizer: non-positive geometry");
  if (image_size % patch_size != 0)
    throw ConfigError("tokenizer: patch_size must divide image_size exactly");
}

Mat patchify(const img::Image& image, const PatchGeometry& geom) {
  geom.validate();
  if (image.h != geom.image_size || image.w != geom.image_size || image.c != geom.channels)
    throw InputError("patchify: image shape does not match geometry");
  const int g = geom.grid();
  const int ps = geom.patch_size;
  Mat out(geom.tokens(), geom.patch_dim());
  for (int py = 0; py < g; ++py)
    for (int px = 0; px < g; ++px) {
      const int row = py * g + px;
      int k = 0;
      for (int y = 0; y < ps; ++y)
        for (int x = 0; x < ps; ++x)
          for (int ch = 0; ch < geom.channels; ++ch)
            out(row, k++) = image.at(py * ps + y, px * ps + x, ch);
    }
  return out;
}

img::Image unpatchify(const Mat& patches, const PatchGeometry& geom) {
  geom.validate();
  if (patches.rows() != geom.tokens() || patches.cols() != geom.patch_dim())
    throw InputError("unpatchify: patch matrix shape does not match geometry");
  const int g = geom.grid();
  const int ps = geom.patch_size;
  img::Image image(geom.image_size, geom.image_size, geom.channels);
  for (int py = 0; py < g; ++py)
    for (int px = 0; px < g; ++px) {
      const int row = py * g + px;
      int k = 0;
      for (int y = 0; y < ps; ++y)
        for (int x = 0; x < ps; ++x)
          for (int ch = 0; ch < geom.channels; ++ch)
            image.at(py * ps + y, px * ps + x, ch) = patches(row, k++);
    }
  return image;
}

Mat sincos_position_table(int grid, int dim) {
  if (dim % 4 != 0) throw ConfigError("sincos position table: dim must be divisible by 4");
  const int half = dim / 2;
  const int q = dim / 4;
  auto axis_table = [&](int pos) {
    Eigen::RowVectorXd emb(half);
    for (int k = 0; k < q; ++k) {
      const double w = 1.0 / std::pow(10000.0, static_cast<double>(k) / q);
      emb(k) = std::sin(pos * w);
      emb(q + k) = std::cos(pos * w);
    }
    return emb;
  };
  Mat table(grid * grid, dim);
  for (int gy = 0; gy < grid; ++gy)
    for (int gx = 0; gx < grid; ++gx) {
      table.block(gy * grid + gx, 0, 1, half) = axis_table(gy);
      table.block(gy * grid + gx, half, 1, half) = axis_table(gx);
    }
  return table;
}

TokenSequence embed(const Mat& patches, Modality modality, const Mat& weight,
                    const Mat& bias, const Mat& position_table) {
  if (patches.cols() != weight.rows())
    throw ConfigError("embed: patch_dim does not match projection");
  if (weight.cols() != bias.cols() || bias.rows() != 1)
    throw ConfigError("embed: bias shape mismatch");
  if (position_table.rows() != patches.rows() || position_table.cols() != weight.cols())
    throw ConfigError("embed: position table shape mismatch");
  TokenSequence seq;
  seq.modality = modality;
  seq.tokens = patches * weight;
  seq.tokens.rowwise() += bias.row(0);
  seq.tokens += position_table;
  return seq;
}

TokenSequence gather_visible(const TokenSequence& seq, const std::vector<int>& visible) {
  TokenSequence out;
  out.modality = seq.modality;
  out.tokens.resize(static_cast<Eigen::Index>(visible.size()), seq.tokens.cols());
  for (size_t i = 0; i < visible.size(); ++i) {
    if (visible[i] < 0 || visible[i] >= seq.tokens.rows())
      throw InternalError("gather_visible: index out of range");
    out.tokens.row(static_cast<Eigen::Index>(i)) = seq.tokens.row(visible[i]);
  }
  return out;
}

}  // namespace crossmae::tokenizer

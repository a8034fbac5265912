#pragma once

#include <Eigen/Dense>
#include <vector>

#include "crossmae/core/image.hpp"

namespace crossmae::tokenizer {

using Mat = Eigen::MatrixXd;

enum class Modality { sat, uav };

// Square patch grid over a square image: P = (image_size / patch_size)^2
// tokens, each a flattened patch of patch_size^2 * channels raw values.
struct PatchGeometry {
  int image_size = 224;
  int patch_size = 16;
  int channels = 3;

  void validate() const;
  int grid() const { return image_size / patch_size; }
  int tokens() const { return grid() * grid(); }
  int patch_dim() const { return patch_size * patch_size * channels; }
};

// Row i of the result is patch i (raster order over the grid), flattened
// row-major as (y, x, channel) within the patch.
Mat patchify(const img::Image& image, const PatchGeometry& geom);

// Exact inverse of patchify.
img::Image unpatchify(const Mat& patches, const PatchGeometry& geom);

// Fixed 2-D sine-cosine positional table, P x dim. The embedding for grid
// cell (gy, gx) concatenates a 1-D table for gy and one for gx, each of
// width dim/2 laid out as [sin(p*w_0..w_{q-1}), cos(p*w_0..w_{q-1})] with
// q = dim/4 frequencies w_k = 1 / 10000^(k/q). Requires dim % 4 == 0.
Mat sincos_position_table(int grid, int dim);

struct TokenSequence {
  Mat tokens;  // length x dim
  Modality modality = Modality::sat;
};

// tokens = patches * weight + bias + position_table. weight is
// patch_dim x dim, bias 1 x dim; the per-modality bias doubles as a modality
// embedding since the position table is shared by construction.
TokenSequence embed(const Mat& patches, Modality modality, const Mat& weight,
                    const Mat& bias, const Mat& position_table);

// Rows of `seq` at the (ascending) indices in `visible`.
TokenSequence gather_visible(const TokenSequence& seq, const std::vector<int>& visible);

}  // namespace crossmae::tokenizer

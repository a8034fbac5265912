#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crossmae/core/image.hpp"

namespace crossmae::pheno {

enum class Index { GLI, NGRDI, NDVI, GNDVI, SAVI };

std::string index_name(Index ix);
bool index_requires_nir(Index ix);
const std::vector<Index>& all_indices();

// Band slots for index computation; nir is optional.
struct BandSet {
  const img::Image* rgb = nullptr;  // H x W x 3
  const img::Image* nir = nullptr;  // H x W x 1 or null
};

// Per-pixel index map. Formulas as printed:
//   GLI   = (2g - r - b) / (2g + r + b)
//   NGRDI = (r - g) / (r + g)
//   NDVI  = (nir - r) / (nir + r)
//   GNDVI = (nir - g) / (nir + g)
//   SAVI  = 1.5 (nir - r) / (nir + r + 0.5)
// Pixels whose denominator magnitude is below 1e-12 map to 0.
img::Image compute_index(const BandSet& bands, Index ix);

// Scalar forms used by the vectorized kernel; exposed so tests can cross
// check against an independently coded evaluation.
double index_at(Index ix, double r, double g, double b, double nir);

}  // namespace crossmae::pheno

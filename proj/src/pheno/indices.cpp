#include "crossmae/pheno/indices.hpp"

#include <cmath>

#include "crossmae/core/errors.hpp"

namespace crossmae::pheno {

namespace {
constexpr double kDenomGuard = 1e-12;

double guarded(double num, double den) {
  return std::abs(den) < kDenomGuard ? 0.0 : num / den;
}
}  // namespace

std::string index_name(Index ix) {
  switch (ix) {
    case Index::GLI: return "gli";
    case Index::NGRDI: return "ngrdi";
    case Index::NDVI: return "ndvi";
    case Index::GNDVI: return "gndvi";
    case Index::SAVI: return "savi";
  }
  throw InternalError("index_name: bad enum");
}

bool index_requires_nir(Index ix) {
  return ix == Index::NDVI || ix == Index::GNDVI || ix == Index::SAVI;
}

const std::vector<Index>& all_indices() {
  static const std::vector<Index> k = {Index::GLI, Index::NGRDI, Index::NDVI,
                                       Index::GNDVI, Index::SAVI};
  return k;
}

double index_at(Index ix, double r, double g, double b, double nir) {
  switch (ix) {
    case Index::GLI:
      return guarded(2.0 * g - r - b, 2.0 * g + r + b);
    case Index::NGRDI:
      return guarded(r - g, r + g);
    case Index::NDVI:
      return guarded(nir - r, nir + r);
    case Index::GNDVI:
      return guarded(nir - g, nir + g);
    case Index::SAVI:
      return guarded(1.5 * (nir - r), nir + r + 0.5);
  }
  throw InternalError("index_at: bad enum");
}

img::Image compute_index(const BandSet& bands, Index ix) {
  if (bands.rgb == nullptr || bands.rgb->c != 3)
    throw InputError("compute_index: RGB bands required");
  if (index_requires_nir(ix) && (bands.nir == nullptr || bands.nir->c != 1))
    throw InputError("compute_index: " + index_name(ix) +
                     " requires the NIR band, which is not available");
  if (bands.nir && (bands.nir->h != bands.rgb->h || bands.nir->w != bands.rgb->w))
    throw InputError("compute_index: NIR plane size mismatch");

  const img::Image& rgb = *bands.rgb;
  img::Image out(rgb.h, rgb.w, 1);
  for (int y = 0; y < rgb.h; ++y)
    for (int x = 0; x < rgb.w; ++x) {
      const double nir = bands.nir ? bands.nir->at(y, x, 0) : 0.0;
      out.at(y, x, 0) =
          index_at(ix, rgb.at(y, x, 0), rgb.at(y, x, 1), rgb.at(y, x, 2), nir);
    }
  return out;
}

}  // namespace crossmae::pheno

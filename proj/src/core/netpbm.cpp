#include "crossmae/core/netpbm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "crossmae/core/errors.hpp"

namespace crossmae::img {

namespace {

int quantize(double v, int maxval) {
  const double q = std::round(std::clamp(v, 0.0, 1.0) * maxval);
  return static_cast<int>(q);
}

void write_samples(std::ostream& os, const Image& im, int maxval) {
  if (maxval > 255) {
    for (double v : im.data) {
      const int q = quantize(v, maxval);
      const unsigned char hi = static_cast<unsigned char>((q >> 8) & 0xff);
      const unsigned char lo = static_cast<unsigned char>(q & 0xff);
      os.put(static_cast<char>(hi));
      os.put(static_cast<char>(lo));
    }
  } else {
    for (double v : im.data) os.put(static_cast<char>(quantize(v, maxval)));
  }
}

// Skips whitespace and '#' comments in a pnm header.
int next_header_int(std::istream& is) {
  for (;;) {
    int ch = is.peek();
    if (ch == '#') {
      std::string line;
      std::getline(is, line);
      continue;
    }
    if (std::isspace(ch)) {
      is.get();
      continue;
    }
    break;
  }
  int value = 0;
  if (!(is >> value)) throw InputError("netpbm: malformed header");
  return value;
}

}  // namespace

void write_raster(const std::string& path, const Image& im, int bit_depth) {
  if (im.empty()) throw InputError("write_raster: empty image");
  if (bit_depth != 8 && bit_depth != 16)
    throw InputError("write_raster: bit depth must be 8 or 16");
  const int maxval = bit_depth == 8 ? 255 : 65535;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("write_raster: cannot open " + path);
  if (im.c == 1) {
    os << "P5\n" << im.w << " " << im.h << "\n" << maxval << "\n";
  } else if (im.c == 3) {
    os << "P6\n" << im.w << " " << im.h << "\n" << maxval << "\n";
  } else {
    os << "P7\nWIDTH " << im.w << "\nHEIGHT " << im.h << "\nDEPTH " << im.c
       << "\nMAXVAL " << maxval << "\nTUPLTYPE CROSSMAE\nENDHDR\n";
  }
  write_samples(os, im, maxval);
  if (!os) throw InputError("write_raster: write failed for " + path);
}

Image read_raster(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("read_raster: cannot open " + path);
  std::string magic;
  is >> magic;
  int w = 0, h = 0, c = 0, maxval = 0;
  if (magic == "P5" || magic == "P6") {
    c = magic == "P5" ? 1 : 3;
    w = next_header_int(is);
    h = next_header_int(is);
    maxval = next_header_int(is);
    is.get();  // single whitespace after maxval
  } else if (magic == "P7") {
    std::string line;
    std::getline(is, line);  // rest of magic line
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      std::string key;
      ls >> key;
      if (key == "WIDTH") ls >> w;
      else if (key == "HEIGHT") ls >> h;
      else if (key == "DEPTH") ls >> c;
      else if (key == "MAXVAL") ls >> maxval;
      else if (key == "ENDHDR") break;
    }
  } else {
    throw InputError("read_raster: unsupported magic '" + magic + "' in " + path);
  }
  if (w <= 0 || h <= 0 || c <= 0 || (maxval != 255 && maxval != 65535))
    throw InputError("read_raster: bad header in " + path);

  Image im(h, w, c);
  const size_t n = im.size();
  if (maxval > 255) {
    std::vector<unsigned char> buf(n * 2);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<size_t>(is.gcount()) != buf.size())
      throw InputError("read_raster: truncated file " + path);
    for (size_t i = 0; i < n; ++i) {
      const int q = (static_cast<int>(buf[2 * i]) << 8) | buf[2 * i + 1];
      im.data[i] = static_cast<double>(q) / maxval;
    }
  } else {
    std::vector<unsigned char> buf(n);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<size_t>(is.gcount()) != buf.size())
      throw InputError("read_raster: truncated file " + path);
    for (size_t i = 0; i < n; ++i) im.data[i] = static_cast<double>(buf[i]) / maxval;
  }
  return im;
}

}  // namespace crossmae::img

#include "cctn/image_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace cctn {

namespace {

int next_pnm_token(std::istream& in, const std::string& path) {
  // Skips whitespace and '#' comments, returns the next integer.
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value = 0;
  if (!(in >> value)) throw std::runtime_error("pnm: malformed header in " + path);
  return value;
}

struct PnmHeader {
  bool color = false;
  Eigen::Index width = 0, height = 0;
};

PnmHeader read_header(std::istream& in, const std::string& path) {
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (!in || m0 != 'P' || (m1 != '5' && m1 != '6'))
    throw std::runtime_error("pnm: " + path + " is not a binary P5/P6 file");
  PnmHeader h;
  h.color = m1 == '6';
  h.width = next_pnm_token(in, path);
  h.height = next_pnm_token(in, path);
  const int maxval = next_pnm_token(in, path);
  if (maxval != 255) throw std::runtime_error("pnm: only maxval 255 supported in " + path);
  in.get();  // single whitespace before raster
  if (h.width <= 0 || h.height <= 0)
    throw std::runtime_error("pnm: non-positive extents in " + path);
  return h;
}

}  // namespace

Tensorf read_image_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("pnm: cannot open " + path);
  const PnmHeader h = read_header(in, path);
  const Eigen::Index pixels = h.width * h.height;
  const Eigen::Index channels = h.color ? 3 : 1;
  std::vector<unsigned char> raw(static_cast<size_t>(pixels * channels));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw std::runtime_error("pnm: truncated raster in " + path);

  Tensorf image({3, h.height, h.width});
  for (Eigen::Index y = 0; y < h.height; ++y)
    for (Eigen::Index x = 0; x < h.width; ++x) {
      const size_t base = static_cast<size_t>((y * h.width + x) * channels);
      for (Eigen::Index c = 0; c < 3; ++c) {
        const unsigned char v = raw[base + static_cast<size_t>(h.color ? c : 0)];
        image(c, y, x) = static_cast<float>(v) / 255.0f;
      }
    }
  return image;
}

void write_image_ppm(const Tensorf& image, const std::string& path) {
  if (image.rank() != 3 || image.extent(0) != 3)
    throw std::invalid_argument("ppm: image must be 3xHxW");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("ppm: cannot write " + path);
  const Eigen::Index h = image.extent(1), w = image.extent(2);
  out << "P6\n" << w << ' ' << h << "\n255\n";
  std::vector<unsigned char> raw(static_cast<size_t>(h * w * 3));
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x)
      for (Eigen::Index c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(image(c, y, x)), 0.0, 1.0);
        raw[static_cast<size_t>((y * w + x) * 3 + c)] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw std::runtime_error("ppm: write failed for " + path);
}

void write_heatmap_pgm(const MapF& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("pgm: cannot write " + path);
  out << "P5\n" << map.cols() << ' ' << map.rows() << "\n255\n";
  std::vector<unsigned char> raw(static_cast<size_t>(map.size()));
  for (Eigen::Index i = 0; i < map.size(); ++i) {
    const double v = std::clamp(static_cast<double>(map.data()[i]), 0.0, 1.0);
    raw[static_cast<size_t>(i)] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw std::runtime_error("pgm: write failed for " + path);
}

MapF read_heatmap_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("pgm: cannot open " + path);
  const PnmHeader h = read_header(in, path);
  if (h.color) throw std::runtime_error("pgm: expected P5 graymap in " + path);
  std::vector<unsigned char> raw(static_cast<size_t>(h.width * h.height));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw std::runtime_error("pgm: truncated raster in " + path);
  MapF map(h.height, h.width);
  for (Eigen::Index i = 0; i < map.size(); ++i)
    map.data()[i] = static_cast<float>(raw[static_cast<size_t>(i)]) / 255.0f;
  return map;
}

}  // namespace cctn

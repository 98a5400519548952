#include "cctn/weights.hpp"

#include "cctn/rng.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cctn {

WeightStore init_weights(const NetworkGraph& graph, std::uint64_t seed) {
  Rng rng(seed);
  WeightStore store;
  for (const Layer& l : graph.layers) {
    if (l.kind != LayerKind::Conv) continue;
    Tensorf w({l.spec.out_channels, l.spec.in_channels, l.spec.kernel_h, l.spec.kernel_w});
    for (Eigen::Index i = 0; i < w.size(); ++i)
      w[i] = static_cast<float>(rng.normal(0.0, 0.01));
    Tensorf b({l.spec.out_channels});
    store.emplace(l.name + ".weight", std::move(w));
    store.emplace(l.name + ".bias", std::move(b));
  }
  return store;
}

void validate_weights(const NetworkGraph& graph, const WeightStore& store) {
  size_t expected = 0;
  for (const Layer& l : graph.layers) {
    if (l.kind != LayerKind::Conv) continue;
    expected += 2;
    const auto wi = store.find(l.name + ".weight");
    const auto bi = store.find(l.name + ".bias");
    if (wi == store.end() || bi == store.end())
      throw std::runtime_error("weights: missing parameters for layer " + l.name);
    const std::vector<Eigen::Index> wshape{l.spec.out_channels, l.spec.in_channels,
                                           l.spec.kernel_h, l.spec.kernel_w};
    if (wi->second.shape() != wshape || bi->second.shape() != std::vector<Eigen::Index>{l.spec.out_channels}) {
      std::ostringstream os;
      os << "weights: shape mismatch for layer " << l.name << ": got "
         << wi->second.shape_string();
      throw std::runtime_error(os.str());
    }
  }
  if (store.size() != expected)
    throw std::runtime_error("weights: store has extra entries not used by the graph");
}

int transfer_matching(const WeightStore& src, WeightStore& dst) {
  int copied = 0;
  for (auto& [name, tensor] : dst) {
    const auto it = src.find(name);
    if (it != src.end() && it->second.shape() == tensor.shape()) {
      tensor = it->second;
      ++copied;
    }
  }
  return copied;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("weights: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32_block(std::ostream& out, const float* data, size_t n) {
  static_assert(sizeof(float) == 4);
  for (size_t i = 0; i < n; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, &data[i], 4);
    put_u32(out, bits);
  }
}

void get_f32_block(std::istream& in, float* data, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    const std::uint32_t bits = get_u32(in);
    std::memcpy(&data[i], &bits, 4);
  }
}

constexpr char kMagic[4] = {'C', 'C', 'T', 'N'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_weights(const WeightStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("weights: cannot write " + path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, tensor] : store) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (Eigen::Index d = 0; d < tensor.rank(); ++d)
      put_u32(out, static_cast<std::uint32_t>(tensor.extent(d)));
    put_f32_block(out, tensor.data(), static_cast<size_t>(tensor.size()));
  }
  if (!out) throw std::runtime_error("weights: write failed for " + path);
}

WeightStore load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("weights: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("weights: " + path + " is not a CCTN weight file");
  const std::uint32_t version = get_u32(in);
  if (version != kVersion)
    throw std::runtime_error("weights: unsupported format version in " + path);
  const std::uint32_t count = get_u32(in);
  WeightStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rank = get_u32(in);
    std::vector<Eigen::Index> shape(rank);
    for (auto& e : shape) e = static_cast<Eigen::Index>(get_u32(in));
    Tensorf t(shape);
    get_f32_block(in, t.data(), static_cast<size_t>(t.size()));
    if (!in) throw std::runtime_error("weights: truncated file " + path);
    store.emplace(std::move(name), std::move(t));
  }
  return store;
}

}  // namespace cctn

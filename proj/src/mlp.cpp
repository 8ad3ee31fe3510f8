#include "pecan/mlp.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "pecan/errors.hpp"
#include "pecan/prng.hpp"

namespace pecan {

namespace {

void check_dims(const std::vector<std::uint32_t>& layer_dims) {
  if (layer_dims.size() < 2)
    throw std::invalid_argument("model needs at least one layer");
  for (std::uint32_t d : layer_dims)
    if (d == 0) throw std::invalid_argument("layer width must be >= 1");
}

void write_u32(std::ofstream& out, std::uint32_t v) {
  char b[4] = {char(v & 0xFF), char((v >> 8) & 0xFF), char((v >> 16) & 0xFF),
               char((v >> 24) & 0xFF)};
  out.write(b, 4);
}

std::uint32_t read_u32(std::ifstream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw format_error(std::string("truncated model file reading ") + what);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

}  // namespace

MlpModel init_model(const std::vector<std::uint32_t>& layer_dims,
                    std::uint64_t seed) {
  check_dims(layer_dims);
  MlpModel m;
  m.layer_dims = layer_dims;
  Prng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::uint32_t d_in = layer_dims[l];
    const std::uint32_t d_out = layer_dims[l + 1];
    const double a = std::sqrt(6.0 / (double(d_in) + double(d_out)));
    std::vector<float> w(std::size_t(d_in) * d_out);
    for (auto& v : w) v = static_cast<float>(rng.uniform(-a, a));
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(d_out, 0.0f);
  }
  return m;
}

MlpModel make_sentinel(const std::vector<std::uint32_t>& layer_dims) {
  check_dims(layer_dims);
  MlpModel m;
  m.layer_dims = layer_dims;
  m.sentinel = true;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    m.weights.emplace_back(std::size_t(layer_dims[l]) * layer_dims[l + 1],
                           0.0f);
    m.biases.emplace_back(layer_dims[l + 1], 0.0f);
  }
  return m;
}

std::vector<float> forward(const MlpModel& m, std::span<const float> x) {
  if (x.size() != m.input_dim())
    throw std::invalid_argument("forward: input size mismatch");
  std::vector<float> act(x.begin(), x.end());
  std::vector<float> next;
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const std::uint32_t d_in = m.layer_dims[l];
    const std::uint32_t d_out = m.layer_dims[l + 1];
    const float* W = m.weights[l].data();
    next.assign(d_out, 0.0f);
    for (std::uint32_t j = 0; j < d_out; ++j) {
      float z = m.biases[l][j];
      const float* row = W + std::size_t(j) * d_in;
      for (std::uint32_t i = 0; i < d_in; ++i) z += row[i] * act[i];
      next[j] = (l + 1 < m.num_layers() && z < 0.0f) ? 0.0f : z;
    }
    act.swap(next);
  }
  return act;
}

std::uint32_t argmax_label(std::span<const float> logits) {
  std::uint32_t best = 0;
  for (std::uint32_t k = 1; k < logits.size(); ++k)
    if (logits[k] > logits[best]) best = k;
  return best;
}

std::uint32_t predict(const MlpModel& m, std::span<const float> x) {
  const std::vector<float> logits = forward(m, x);
  return argmax_label(logits);
}

double cross_entropy(std::span<const double> logits, std::uint32_t y) {
  if (y >= logits.size())
    throw std::invalid_argument("cross_entropy: label out of range");
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  return mx + std::log(sum) - logits[y];
}

double cross_entropy_f(std::span<const float> logits, std::uint32_t y) {
  std::vector<double> z(logits.begin(), logits.end());
  return cross_entropy(z, y);
}

void save_model(const MlpModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out.write("PECN", 4);
  write_u32(out, 1);  // format version
  write_u32(out, m.sentinel ? 1 : 0);
  write_u32(out, static_cast<std::uint32_t>(m.layer_dims.size()));
  for (std::uint32_t d : m.layer_dims) write_u32(out, d);
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    for (float v : m.weights[l]) write_u32(out, std::bit_cast<std::uint32_t>(v));
    for (float v : m.biases[l]) write_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  out.flush();
  if (!out) throw io_error("write failed on " + path.string());
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "PECN", 4) != 0)
    throw format_error(path.string() + ": not a model file (bad magic)");
  const std::uint32_t version = read_u32(in, "version");
  if (version != 1)
    throw format_error(path.string() + ": unsupported model format version " +
                       std::to_string(version));
  MlpModel m;
  m.sentinel = read_u32(in, "sentinel flag") != 0;
  const std::uint32_t num_dims = read_u32(in, "layer count");
  if (num_dims < 2 || num_dims > 64)
    throw format_error(path.string() + ": implausible layer count " +
                       std::to_string(num_dims));
  m.layer_dims.resize(num_dims);
  for (auto& d : m.layer_dims) {
    d = read_u32(in, "layer width");
    if (d == 0 || d > (1u << 24))
      throw format_error(path.string() + ": implausible layer width");
  }
  for (std::size_t l = 0; l + 1 < num_dims; ++l) {
    std::vector<float> w(std::size_t(m.layer_dims[l]) * m.layer_dims[l + 1]);
    for (auto& v : w) v = std::bit_cast<float>(read_u32(in, "weight"));
    std::vector<float> b(m.layer_dims[l + 1]);
    for (auto& v : b) v = std::bit_cast<float>(read_u32(in, "bias"));
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  char extra;
  if (in.read(&extra, 1))
    throw format_error(path.string() + ": trailing bytes after model payload");
  return m;
}

}  // namespace pecan

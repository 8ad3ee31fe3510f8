#include "pecan/data.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "pecan/errors.hpp"
#include "pecan/prng.hpp"

namespace pecan {

namespace {

void append_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw io_error("read failed on " + path.string());
  return std::move(buf).str();
}

std::uint32_t read_u32_be(const std::string& buf, std::size_t off,
                          const char* what) {
  if (off + 4 > buf.size())
    throw format_error(std::string("truncated IDX header reading ") + what);
  auto b = [&](std::size_t i) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + i]));
  };
  return (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
}

}  // namespace

std::string canonical_bytes(const Example& e) {
  std::string out;
  out.reserve(4 * e.features.size() + 4);
  for (float f : e.features) append_u32_le(out, std::bit_cast<std::uint32_t>(f));
  append_u32_le(out, e.label);
  return out;
}

std::uint64_t symdiff_size(const Dataset& a, const Dataset& b) {
  if (a.feature_dim != b.feature_dim)
    throw std::invalid_argument("symdiff_size: feature_dim mismatch");
  std::unordered_map<std::string, std::int64_t> counts;
  counts.reserve(a.size() + b.size());
  for (const auto& e : a.examples) counts[canonical_bytes(e)] += 1;
  for (const auto& e : b.examples) counts[canonical_bytes(e)] -= 1;
  std::uint64_t total = 0;
  for (const auto& [bytes, c] : counts)
    total += static_cast<std::uint64_t>(c < 0 ? -c : c);
  return total;
}

Dataset load_idx(const std::filesystem::path& images,
                 const std::filesystem::path& labels) {
  const std::string img = read_file(images);
  const std::string lab = read_file(labels);

  std::uint32_t img_magic = read_u32_be(img, 0, "image magic");
  if (img_magic != 0x00000803u) {
    std::ostringstream msg;
    msg << "bad image magic in " << images.string() << ": expected 0x00000803, got 0x"
        << std::hex << img_magic;
    throw format_error(msg.str());
  }
  std::uint32_t count = read_u32_be(img, 4, "image count");
  std::uint32_t rows = read_u32_be(img, 8, "row count");
  std::uint32_t cols = read_u32_be(img, 12, "column count");
  std::uint64_t pixels = std::uint64_t(count) * rows * cols;
  if (img.size() != 16 + pixels)
    throw format_error("image payload size mismatch in " + images.string());

  std::uint32_t lab_magic = read_u32_be(lab, 0, "label magic");
  if (lab_magic != 0x00000801u) {
    std::ostringstream msg;
    msg << "bad label magic in " << labels.string() << ": expected 0x00000801, got 0x"
        << std::hex << lab_magic;
    throw format_error(msg.str());
  }
  std::uint32_t lab_count = read_u32_be(lab, 4, "label count");
  if (lab_count != count)
    throw format_error("image/label count mismatch: " + std::to_string(count) +
                       " images vs " + std::to_string(lab_count) + " labels");
  if (lab.size() != 8 + std::uint64_t(lab_count))
    throw format_error("label payload size mismatch in " + labels.string());

  Dataset d;
  d.feature_dim = rows * cols;
  d.num_classes = 10;
  d.examples.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Example& e = d.examples[i];
    e.features.resize(d.feature_dim);
    const unsigned char* px =
        reinterpret_cast<const unsigned char*>(img.data()) + 16 +
        std::uint64_t(i) * d.feature_dim;
    for (std::uint32_t j = 0; j < d.feature_dim; ++j)
      e.features[j] = static_cast<float>(px[j]) / 255.0f;
    unsigned char y = static_cast<unsigned char>(lab[8 + i]);
    if (y >= 10)
      throw format_error("label out of range at index " + std::to_string(i) +
                         ": " + std::to_string(int(y)));
    e.label = y;
  }
  return d;
}

Dataset load_csv(const std::filesystem::path& path, std::uint32_t num_classes,
                 bool normalize) {
  if (num_classes < 2)
    throw std::invalid_argument("load_csv: num_classes must be >= 2");
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());

  Dataset d;
  d.num_classes = num_classes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::string_view sv(line);
    for (std::size_t pos = 0;;) {
      std::size_t comma = sv.find(',', pos);
      if (comma == std::string_view::npos) {
        fields.push_back(sv.substr(pos));
        break;
      }
      fields.push_back(sv.substr(pos, comma - pos));
      pos = comma + 1;
    }
    if (fields.size() < 2)
      throw format_error(path.string() + ":" + std::to_string(lineno) +
                         ": need at least one feature and a label");
    if (d.feature_dim == 0) {
      d.feature_dim = static_cast<std::uint32_t>(fields.size() - 1);
    } else if (fields.size() - 1 != d.feature_dim) {
      throw format_error(path.string() + ":" + std::to_string(lineno) +
                         ": expected " + std::to_string(d.feature_dim + 1) +
                         " fields, got " + std::to_string(fields.size()));
    }

    Example e;
    e.features.resize(d.feature_dim);
    for (std::uint32_t j = 0; j < d.feature_dim; ++j) {
      std::string_view f = fields[j];
      float v = 0.0f;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
        throw format_error(path.string() + ":" + std::to_string(lineno) +
                           ": column " + std::to_string(j + 1) +
                           " is not a finite number: '" + std::string(f) + "'");
      e.features[j] = v;  // clamped below, after optional normalization
    }
    std::string_view f = fields.back();
    std::uint32_t y = 0;
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), y);
    if (ec != std::errc() || ptr != f.data() + f.size())
      throw format_error(path.string() + ":" + std::to_string(lineno) +
                         ": label is not a non-negative integer: '" +
                         std::string(f) + "'");
    if (y >= num_classes)
      throw format_error(path.string() + ":" + std::to_string(lineno) +
                         ": label " + std::to_string(y) + " >= num_classes " +
                         std::to_string(num_classes));
    e.label = y;
    d.examples.push_back(std::move(e));
  }
  if (in.bad()) throw io_error("read failed on " + path.string());

  if (normalize && !d.empty()) {
    std::vector<float> lo(d.feature_dim, std::numeric_limits<float>::max());
    std::vector<float> hi(d.feature_dim, std::numeric_limits<float>::lowest());
    for (const auto& e : d.examples)
      for (std::uint32_t j = 0; j < d.feature_dim; ++j) {
        lo[j] = std::min(lo[j], e.features[j]);
        hi[j] = std::max(hi[j], e.features[j]);
      }
    for (auto& e : d.examples)
      for (std::uint32_t j = 0; j < d.feature_dim; ++j) {
        float range = hi[j] - lo[j];
        e.features[j] =
            range > 0.0f ? (e.features[j] - lo[j]) / range : 0.0f;
      }
  }
  for (auto& e : d.examples)
    for (auto& v : e.features) v = clamp01(v);
  return d;
}

void save_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  char buf[64];
  for (const auto& e : d.examples) {
    for (float v : e.features) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      if (ec != std::errc()) throw io_error("float formatting failed");
      out.write(buf, ptr - buf);
      out.put(',');
    }
    out << e.label << '\n';
  }
  out.flush();
  if (!out) throw io_error("write failed on " + path.string());
}

Dataset synth_blobs(std::uint32_t num_classes, std::uint32_t feature_dim,
                    std::uint32_t per_class, double spread,
                    std::uint64_t seed) {
  if (num_classes < 2)
    throw std::invalid_argument("synth_blobs: num_classes must be >= 2");
  if (feature_dim == 0)
    throw std::invalid_argument("synth_blobs: feature_dim must be >= 1");
  Dataset d;
  d.feature_dim = feature_dim;
  d.num_classes = num_classes;
  d.examples.reserve(std::size_t(num_classes) * per_class);
  Prng rng(seed);
  for (std::uint32_t k = 0; k < num_classes; ++k) {
    const double center = double(k + 1) / double(num_classes + 1);
    for (std::uint32_t i = 0; i < per_class; ++i) {
      Example e;
      e.label = k;
      e.features.resize(feature_dim);
      for (std::uint32_t j = 0; j < feature_dim; ++j) {
        double v = center + spread * rng.uniform(-1.0, 1.0);
        e.features[j] = clamp01(static_cast<float>(v));
      }
      d.examples.push_back(std::move(e));
    }
  }
  return d;
}

}  // namespace pecan

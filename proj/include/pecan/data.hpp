#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace pecan {

// One training/test example. Features live in [0, 1] (enforced by clamping
// at every ingestion point) and are stored as float32 so that the on-disk
// canonical encoding is exact.
struct Example {
  std::vector<float> features;
  std::uint32_t label = 0;

  bool operator==(const Example&) const = default;
};

struct Dataset {
  std::vector<Example> examples;
  std::uint32_t feature_dim = 0;
  std::uint32_t num_classes = 0;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
};

// Content identity of an example: feature_dim float32 little-endian words
// followed by one uint32 little-endian label. Hashing and multiset
// comparisons operate on these bytes, never on pointers or indices.
std::string canonical_bytes(const Example& e);

// Symmetric-difference size between two datasets viewed as multisets of
// canonical byte strings. A modification counts as one deletion plus one
// insertion, i.e. contributes 2.
std::uint64_t symdiff_size(const Dataset& a, const Dataset& b);

// IDX (big-endian magic 0x00000803 images / 0x00000801 labels) loader.
// Pixels are scaled to [0, 1] as byte/255. Labels must be < 10.
Dataset load_idx(const std::filesystem::path& images,
                 const std::filesystem::path& labels);

// CSV: one row per example, feature_dim floats then an integer label.
// With normalize=true, features are min-max scaled per column; otherwise
// they are clamped to [0, 1].
Dataset load_csv(const std::filesystem::path& path, std::uint32_t num_classes,
                 bool normalize);

// Writes CSV that load_csv(path, num_classes, false) reads back exactly:
// shortest-round-trip float formatting.
void save_csv(const Dataset& d, const std::filesystem::path& path);

// Deterministic synthetic blobs: class k is centered at (k+1)/(C+1) in every
// coordinate, points are center + spread * uniform(-1, 1) per coordinate,
// clamped to [0, 1]. Examples are ordered class-major.
Dataset synth_blobs(std::uint32_t num_classes, std::uint32_t feature_dim,
                    std::uint32_t per_class, double spread,
                    std::uint64_t seed);

// Clamp helper used by every ingestion path.
inline float clamp01(float v) {
  if (!(v > 0.0f)) return 0.0f;  // also maps NaN to 0
  return v < 1.0f ? v : 1.0f;
}

}  // namespace pecan

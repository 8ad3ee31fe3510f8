#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace pecan {

// Fully-connected ReLU network. Weights are row-major (d_out x d_in) float32.
// The last layer has no activation; its outputs are the logits.
//
// `sentinel` marks the constant stand-in trained on an empty partition: all
// weights zero, so every input maps to logits 0 and predict() returns class 0.
struct MlpModel {
  std::vector<std::uint32_t> layer_dims;         // [d_in, h1, ..., d_out]
  std::vector<std::vector<float>> weights;       // one block per layer
  std::vector<std::vector<float>> biases;
  bool sentinel = false;

  std::size_t num_layers() const { return weights.size(); }
  std::uint32_t input_dim() const { return layer_dims.front(); }
  std::uint32_t output_dim() const { return layer_dims.back(); }
};

// Glorot-uniform init: layer weights ~ U(-a, a) with a = sqrt(6/(d_in+d_out)),
// biases zero. All draws come from one Prng(seed) stream, in layer order,
// row-major, so the result is a pure function of (layer_dims, seed).
MlpModel init_model(const std::vector<std::uint32_t>& layer_dims,
                    std::uint64_t seed);

// All-zero network with the given architecture, flagged as sentinel.
MlpModel make_sentinel(const std::vector<std::uint32_t>& layer_dims);

// Forward pass in float32, sequential accumulation. Returns logits.
std::vector<float> forward(const MlpModel& m, std::span<const float> x);

// argmax with ties broken toward the smaller index.
std::uint32_t argmax_label(std::span<const float> logits);

std::uint32_t predict(const MlpModel& m, std::span<const float> x);

// Numerically stabilized cross-entropy (max subtraction), computed in double.
double cross_entropy(std::span<const double> logits, std::uint32_t y);
double cross_entropy_f(std::span<const float> logits, std::uint32_t y);

// Binary model file, little-endian, magic "PECN", format version 1.
void save_model(const MlpModel& m, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace pecan

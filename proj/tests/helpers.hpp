#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "pecan/mlp.hpp"
#include "pecan/prng.hpp"

namespace testutil {

// Self-cleaning unique temp directory for round-trip tests.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<unsigned> counter{0};
    auto base = std::filesystem::temp_directory_path();
    path = base / ("pecan_test_" + std::to_string(::getpid()) + "_" +
                   std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const {
    return path / name;
  }
};

// Hand-built model: one block of weights per layer, row-major.
inline pecan::MlpModel make_model(std::vector<std::uint32_t> dims,
                                  std::vector<std::vector<float>> weights,
                                  std::vector<std::vector<float>> biases) {
  pecan::MlpModel m;
  m.layer_dims = std::move(dims);
  m.weights = std::move(weights);
  m.biases = std::move(biases);
  return m;
}

// Random small model with weights in [-scale, scale], for property tests.
inline pecan::MlpModel random_model(const std::vector<std::uint32_t>& dims,
                                    std::uint64_t seed, float scale = 1.0f) {
  pecan::MlpModel m;
  m.layer_dims = dims;
  pecan::Prng rng(seed);
  for (std::size_t l = 1; l < dims.size(); ++l) {
    std::size_t n = static_cast<std::size_t>(dims[l]) * dims[l - 1];
    std::vector<float> w(n);
    for (auto& v : w)
      v = static_cast<float>(rng.uniform(-scale, scale));
    std::vector<float> b(dims[l]);
    for (auto& v : b)
      v = static_cast<float>(rng.uniform(-scale, scale));
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  return m;
}

inline std::vector<float> random_point(std::uint32_t dim, pecan::Prng& rng) {
  std::vector<float> x(dim);
  for (auto& v : x) v = static_cast<float>(rng.next_double());
  return x;
}

}  // namespace testutil

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pecan/bounds.hpp"
#include "pecan/certify.hpp"
#include "pecan/data.hpp"
#include "pecan/mlp.hpp"

namespace pecan {

// Robust-training schedule: epochs_warmup of plain cross-entropy, then
// epochs_mixed blending (1-beta)*natural + beta*robust with beta and the
// region size ramping linearly 0 -> full per optimizer step, then epochs_full
// of robust loss only. kappa (the natural/worst-case blend inside the robust
// loss) ramps kappa_start -> kappa_end across mixed+full steps.
struct TrainConfig {
  std::vector<std::uint32_t> layer_dims;
  std::uint64_t seed = 0;
  std::uint32_t epochs_warmup = 0;
  std::uint32_t epochs_mixed = 0;
  std::uint32_t epochs_full = 0;
  std::uint32_t batch_size = 64;
  float learning_rate = 0.05f;
  float momentum = 0.9f;
  RegionKind region_kind = RegionKind::L0;
  double eps_train = 0.0;     // LInf ramp target
  std::uint32_t s_train = 0;  // L0 ramp target
  double kappa_start = 0.0;
  double kappa_end = 0.0;

  std::uint32_t total_epochs() const {
    return epochs_warmup + epochs_mixed + epochs_full;
  }
  RegionSpec train_region() const {
    RegionSpec spec;
    spec.kind = region_kind;
    spec.eps = eps_train;
    spec.s = s_train;
    return spec;
  }
  void validate(std::uint32_t feature_dim, std::uint32_t num_classes) const;
};

// Per-parameter gradient accumulator. Double so that batch accumulation and
// the finite-difference checks are not at the mercy of float32 cancellation;
// the optimizer casts back to float32 at update time.
struct ModelGrads {
  std::vector<std::vector<double>> dW;
  std::vector<std::vector<double>> db;
};

ModelGrads zero_grads(const MlpModel& m);

// Accumulates scale * d(natural cross-entropy)/d(theta) into g.
// Returns the (unscaled) loss value.
double accumulate_natural_grad(const MlpModel& m, std::span<const float> x,
                               std::uint32_t y, double scale, ModelGrads& g);

// Accumulates scale * d(worst-case cross-entropy)/d(theta) into g, where the
// worst case is taken over propagate() bounds for the region around x.
// Returns the (unscaled) loss value.
double accumulate_worst_grad(const MlpModel& m, std::span<const float> x,
                             std::uint32_t y, const RegionSpec& spec,
                             double scale, ModelGrads& g);

// Fresh-gradient wrappers for the two public losses.
double natural_loss_grad(const MlpModel& m, std::span<const float> x,
                         std::uint32_t y, ModelGrads& g);
double robust_loss_grad(const MlpModel& m, std::span<const float> x,
                        std::uint32_t y, const RegionSpec& spec, double kappa,
                        ModelGrads& g);

// Deterministic SGD+momentum training of one partition model. The RNG state
// is SplitMix64-derived from cfg.seed XOR model_seed, so each partition id
// gets an independent stream. An empty dataset yields the always-abstain
// sentinel. If epoch_natural_loss is given, it receives the running mean
// natural cross-entropy of each epoch.
MlpModel train(const Dataset& d, const TrainConfig& cfg,
               std::uint64_t model_seed,
               std::vector<double>* epoch_natural_loss = nullptr);

}  // namespace pecan

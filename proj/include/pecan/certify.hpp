#pragma once

#include <cstdint>
#include <span>

#include "pecan/bounds.hpp"
#include "pecan/mlp.hpp"

namespace pecan {

enum class Verdict { Cert, Abstain };

struct CertifiedPrediction {
  std::uint32_t label = 0;
  Verdict verdict = Verdict::Abstain;
};

// Per-model test-time certificate: the prediction c = predict(m, x) is
// certified iff lower(logit_c) > upper(logit_k) for every k != c over the
// whole region (exact bound ties abstain -- the sound side). Sentinels always
// abstain. use_crown additionally tightens the bounds with the backward
// relaxation before the comparison.
CertifiedPrediction certify_example(const MlpModel& m, std::span<const float> x,
                                    const RegionSpec& spec, bool use_crown);

// CROWN-IBP style robust loss:
//   kappa * CE(forward(x), y) + (1 - kappa) * CE(z_hat, y)
// where z_hat picks the lower bound for the true class and upper bounds for
// the rest (the worst case the bounds allow). Bounds come from propagate().
double robust_loss(const MlpModel& m, std::span<const float> x,
                   std::uint32_t y, const RegionSpec& spec, double kappa);

// The worst-case cross-entropy term alone (kappa = 0 part).
double worst_case_loss(const MlpModel& m, std::span<const float> x,
                       std::uint32_t y, const RegionSpec& spec);

}  // namespace pecan

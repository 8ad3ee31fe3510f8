#include "pecan/certify.hpp"

#include <stdexcept>
#include <vector>

namespace pecan {

CertifiedPrediction certify_example(const MlpModel& m, std::span<const float> x,
                                    const RegionSpec& spec, bool use_crown) {
  if (m.sentinel) return {0, Verdict::Abstain};
  const std::uint32_t c = predict(m, x);
  const Region region = anchor(spec, x);
  const Interval logits =
      use_crown ? crown_tighten(m, region) : propagate(m, region);
  for (std::uint32_t k = 0; k < m.output_dim(); ++k) {
    if (k == c) continue;
    if (!(logits.lower[c] > logits.upper[k]))
      return {c, Verdict::Abstain};
  }
  return {c, Verdict::Cert};
}

double worst_case_loss(const MlpModel& m, std::span<const float> x,
                       std::uint32_t y, const RegionSpec& spec) {
  if (y >= m.output_dim())
    throw std::invalid_argument("worst_case_loss: label out of range");
  const Interval logits = propagate(m, anchor(spec, x));
  std::vector<double> z_hat(m.output_dim());
  for (std::uint32_t k = 0; k < m.output_dim(); ++k)
    z_hat[k] = (k == y) ? logits.lower[k] : logits.upper[k];
  return cross_entropy(z_hat, y);
}

double robust_loss(const MlpModel& m, std::span<const float> x,
                   std::uint32_t y, const RegionSpec& spec, double kappa) {
  if (kappa < 0.0 || kappa > 1.0)
    throw std::invalid_argument("robust_loss: kappa must be in [0, 1]");
  double loss = 0.0;
  if (kappa > 0.0) loss += kappa * cross_entropy_f(forward(m, x), y);
  if (kappa < 1.0) loss += (1.0 - kappa) * worst_case_loss(m, x, y, spec);
  return loss;
}

}  // namespace pecan

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pecan/mlp.hpp"

namespace pecan {

// Element-wise interval vector. Bounds are tracked in double even though the
// network stores float32 weights; the float values are promoted exactly, so
// the extra precision only reduces slack, never soundness.
struct Interval {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t size() const { return lower.size(); }
};

enum class RegionKind { LInf, L0 };

RegionKind region_kind_from_string(const std::string& s);
std::string to_string(RegionKind k);

// Test-time perturbation region descriptor, independent of any anchor point.
// LInf: all points within eps in every coordinate, clipped to [0, 1].
// L0:   up to s coordinates replaced by arbitrary values in [0, 1].
struct RegionSpec {
  RegionKind kind = RegionKind::L0;
  double eps = 0.0;     // LInf radius
  std::uint32_t s = 0;  // L0 budget

  bool is_zero() const {
    return kind == RegionKind::LInf ? eps == 0.0 : s == 0;
  }
  void validate(std::uint32_t feature_dim) const;
};

// RegionSpec anchored at a concrete input.
struct Region {
  RegionSpec spec;
  std::vector<float> center;
};

inline Region anchor(const RegionSpec& spec, std::span<const float> x) {
  return Region{spec, std::vector<float>(x.begin(), x.end())};
}

// Input box for an LInf region (intersected with the [0,1] domain).
Interval input_interval(const Region& r);

// Interval affine map, W row-major (d_out x d_in):
//   lower_j = b_j + sum_i (W_ji >= 0 ? W_ji*l_i : W_ji*u_i), upper_j dual.
Interval ibp_affine(const Interval& in, std::span<const float> W,
                    std::span<const float> b);

Interval ibp_relu(Interval in);

// Exact reachable-set bounds of an affine layer over the L0 region around x:
//   upper_j = z_j(x) + sum of the s largest gains g+_ji,
//   g+_ji = max(0, W_ji*(1 - x_i), -W_ji*x_i)   (g- symmetric).
// Exact because coordinates can be perturbed independently.
Interval l0_first_layer_bounds(std::span<const float> x,
                               std::span<const float> W,
                               std::span<const float> b, std::uint32_t s);

// Pre-activation bounds of every layer under plain interval propagation
// (first layer exact for L0 regions). pre[l] bounds z_l; pre.back() = logits.
struct BoundStack {
  std::vector<Interval> pre;
};

BoundStack propagate_layers(const MlpModel& m, const Region& r);

// Logit bounds via interval propagation.
Interval propagate(const MlpModel& m, const Region& r);

// CROWN backward linear relaxation, concretized over the region and
// intersected with the propagate() bounds, so the result is always at least
// as tight as IBP.
Interval crown_tighten(const MlpModel& m, const Region& r);

// Sum of the min(s, gains.size()) largest entries. Gains must be >= 0.
// Scratch buffer is clobbered.
double sum_top_s(std::vector<double>& gains, std::uint32_t s);

}  // namespace pecan

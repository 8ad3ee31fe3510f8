#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pecan/certify.hpp"

namespace pecan {

// One ensemble member's output on a test input. Sentinel votes are the
// placeholders of empty partitions: they carry no label opinion and always
// abstain.
struct Vote {
  std::uint32_t label = 0;
  Verdict verdict = Verdict::Abstain;
  bool sentinel = false;
};

struct AggregateResult {
  std::uint32_t y_star = 0;   // ensemble prediction (plurality of all votes)
  std::uint32_t y_prime = 0;  // runner-up label
  std::uint64_t n1 = 0;       // certified votes for y_star
  std::uint64_t n2 = 0;       // certified votes for y_prime
  std::uint64_t n3 = 0;       // abstaining votes (sentinels included)
  // Certified poisoning radius in symmetric-difference units (one deletion or
  // one insertion each; a modification spends two). nullopt = no guarantee at
  // any radius, not even against pure evasion.
  std::optional<std::int64_t> radius;
};

// Vote aggregation with the certified radius
//   floor((n1 - n2 - n3 - [y_star > y_prime]) / 2),
// nullopt when the numerator is negative. Label tallies count every
// non-sentinel vote regardless of verdict; n1/n2 count only certified votes;
// sentinels only contribute to n3; ties break toward the smaller label.
AggregateResult aggregate(const std::vector<Vote>& votes,
                          std::uint32_t num_classes);

// DPA baseline: bounds ignored, every vote treated as certified (n3 = 0).
// Labels include empty-partition stand-ins voting class 0.
AggregateResult dpa_radius(const std::vector<std::uint32_t>& labels,
                           std::uint32_t num_classes);

// Number of modify-one-example operations a radius covers: floor(r / 2),
// since each modification is one deletion plus one insertion.
std::int64_t radius_to_modifications(std::int64_t r);

}  // namespace pecan

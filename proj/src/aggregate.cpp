#include "pecan/aggregate.hpp"

#include <stdexcept>

namespace pecan {

namespace {

AggregateResult tally(const std::vector<std::uint64_t>& counts,
                      const std::vector<std::uint64_t>& cert_counts,
                      std::uint64_t n3) {
  const std::uint32_t num_classes =
      static_cast<std::uint32_t>(counts.size());
  AggregateResult res;
  res.n3 = n3;
  res.y_star = 0;
  for (std::uint32_t k = 1; k < num_classes; ++k)
    if (counts[k] > counts[res.y_star]) res.y_star = k;  // ties keep smaller
  bool have_prime = false;
  for (std::uint32_t k = 0; k < num_classes; ++k) {
    if (k == res.y_star) continue;
    if (!have_prime || counts[k] > counts[res.y_prime]) {
      res.y_prime = k;
      have_prime = true;
    }
  }
  res.n1 = cert_counts[res.y_star];
  res.n2 = cert_counts[res.y_prime];
  const std::int64_t tie_penalty = res.y_star > res.y_prime ? 1 : 0;
  const std::int64_t margin = std::int64_t(res.n1) - std::int64_t(res.n2) -
                              std::int64_t(res.n3) - tie_penalty;
  if (margin >= 0) res.radius = margin / 2;
  return res;
}

}  // namespace

AggregateResult aggregate(const std::vector<Vote>& votes,
                          std::uint32_t num_classes) {
  if (votes.empty()) throw std::invalid_argument("aggregate: empty vote list");
  if (num_classes < 2)
    throw std::invalid_argument("aggregate: num_classes must be >= 2");
  std::vector<std::uint64_t> counts(num_classes, 0);
  std::vector<std::uint64_t> cert_counts(num_classes, 0);
  std::uint64_t n3 = 0;
  for (const Vote& v : votes) {
    if (v.sentinel) {
      // Empty-partition stand-in: no label opinion, counted as abstention.
      ++n3;
      continue;
    }
    if (v.label >= num_classes)
      throw std::invalid_argument("aggregate: vote label out of range");
    ++counts[v.label];
    if (v.verdict == Verdict::Cert)
      ++cert_counts[v.label];
    else
      ++n3;
  }
  return tally(counts, cert_counts, n3);
}

AggregateResult dpa_radius(const std::vector<std::uint32_t>& labels,
                           std::uint32_t num_classes) {
  if (labels.empty())
    throw std::invalid_argument("dpa_radius: empty label list");
  if (num_classes < 2)
    throw std::invalid_argument("dpa_radius: num_classes must be >= 2");
  std::vector<std::uint64_t> counts(num_classes, 0);
  for (std::uint32_t label : labels) {
    if (label >= num_classes)
      throw std::invalid_argument("dpa_radius: label out of range");
    ++counts[label];
  }
  return tally(counts, counts, 0);
}

std::int64_t radius_to_modifications(std::int64_t r) {
  if (r < 0)
    throw std::invalid_argument("radius_to_modifications: negative radius");
  return r / 2;
}

}  // namespace pecan

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pecan/ensemble.hpp"

namespace pecan {

struct AuditOptions {
  std::uint64_t n = 20;  // ensemble size
  TrainConfig cfg;
  RegionSpec region;
  std::uint64_t trials = 100;
  std::uint64_t seed = 0;
  bool bidirectional = true;  // also check the poisoned-side certificate
  // Extra trials run at budget radius+1; their flips are recorded, never
  // asserted (they sit outside the guarantee).
  std::uint64_t over_budget_trials = 0;
  bool use_crown = false;
  unsigned jobs = 0;  // 0 = resolve via PECAN_JOBS / hardware
};

struct AuditTrial {
  std::uint64_t example_id = 0;   // audited test row
  std::int64_t radius = 0;        // its certified radius on the clean data
  std::uint64_t budget = 0;       // attacker budget r_a in symdiff units
  std::uint64_t deletes = 0;
  std::uint64_t inserts = 0;
  std::uint64_t modifies = 0;
  std::uint64_t actual_symdiff = 0;
  std::uint64_t affected_partitions = 0;
  std::uint64_t trigger_size = 0;  // coordinates the sampled trigger touched
  bool over_budget = false;
  bool violated = false;        // poisoned-ensemble prediction left y_star
  bool bidir_checked = false;   // poisoned-side certificate covered the clean side
  bool bidir_violated = false;
};

struct AuditReport {
  std::uint64_t trials = 0;       // within-budget trials run
  std::uint64_t violations = 0;   // must be zero
  std::uint64_t bidir_checked = 0;
  std::uint64_t bidir_violations = 0;  // must be zero
  std::uint64_t over_budget_trials = 0;
  std::uint64_t over_budget_flips = 0;  // informational
  std::uint64_t test_size = 0;
  std::uint64_t certified_rows = 0;  // baseline rows carrying a certificate
  std::vector<AuditTrial> per_trial;
};

// Executable soundness check of the certified radius. Builds the clean
// baseline (partition, train, certify), then per trial: picks a certified
// test row, draws an attack budget within its radius, perturbs the training
// set inside that budget (mixed deletes/inserts/modifies), retrains ONLY the
// affected partitions (exact by partition locality, which is re-verified on
// every trial), samples a trigger inside the region, and re-aggregates. Any
// prediction change is a violation. The bidirectional mode additionally
// certifies the poisoned side and checks the reverse direction whenever that
// certificate covers the clean data.
AuditReport audit_soundness(const Dataset& train_ds, const Dataset& test_ds,
                            const AuditOptions& opt);

void save_audit_report(const AuditReport& report,
                       const std::filesystem::path& path);

}  // namespace pecan

#include "pecan/audit.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "pecan/errors.hpp"
#include "pecan/parallel.hpp"
#include "pecan/prng.hpp"

namespace pecan {

namespace {

// Draws x~ in pi(x): for L0, overwrite up to s random coordinates (k is
// sampled, so the null trigger occurs too); for LInf, sample uniformly in
// the clipped box, falling back to the anchor value if float rounding would
// escape it.
std::vector<float> sample_trigger(const std::vector<float>& x,
                                  const RegionSpec& spec, Prng& rng,
                                  std::uint64_t& touched) {
  std::vector<float> out = x;
  touched = 0;
  if (spec.kind == RegionKind::L0) {
    const std::uint32_t k = static_cast<std::uint32_t>(
        rng.next_below(std::uint64_t(spec.s) + 1));
    if (k == 0) return out;
    std::vector<std::uint32_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0u);
    for (std::uint32_t j = 0; j < k; ++j) {
      const std::uint64_t pick = j + rng.next_below(idx.size() - j);
      std::swap(idx[j], idx[pick]);
      out[idx[j]] = static_cast<float>(rng.next_double());
    }
    touched = k;
    return out;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lo = std::max(0.0, double(x[i]) - spec.eps);
    const double hi = std::min(1.0, double(x[i]) + spec.eps);
    const float v = static_cast<float>(rng.uniform(lo, hi));
    if (double(v) >= lo && double(v) <= hi) {
      out[i] = v;
      ++touched;
    }
  }
  return out;
}

// In-place feature-or-label modification guaranteed to change the example's
// canonical bytes.
void modify_example(Example& e, std::uint32_t num_classes, Prng& rng) {
  const Example before = e;
  if (rng.next_below(2) == 0 && !e.features.empty()) {
    const std::uint64_t i = rng.next_below(e.features.size());
    e.features[i] = static_cast<float>(rng.next_double());
  } else {
    e.label = static_cast<std::uint32_t>(
        (e.label + 1 + rng.next_below(num_classes - 1)) % num_classes);
  }
  if (canonical_bytes(e) == canonical_bytes(before)) {
    // The random feature value collided with the old one; flip the label,
    // which always produces new bytes.
    e.label = static_cast<std::uint32_t>((e.label + 1) % num_classes);
  }
}

Example random_insert(std::uint32_t feature_dim, std::uint32_t num_classes,
                      Prng& rng) {
  Example e;
  e.features.resize(feature_dim);
  for (auto& v : e.features) v = static_cast<float>(rng.next_double());
  e.label = static_cast<std::uint32_t>(rng.next_below(num_classes));
  return e;
}

}  // namespace

AuditReport audit_soundness(const Dataset& train_ds, const Dataset& test_ds,
                            const AuditOptions& opt) {
  if (opt.n == 0) throw std::invalid_argument("audit: n must be >= 1");
  if (train_ds.empty()) throw std::invalid_argument("audit: empty train set");
  if (test_ds.empty()) throw std::invalid_argument("audit: empty test set");
  opt.region.validate(train_ds.feature_dim);
  const unsigned jobs = resolve_jobs(opt.jobs);

  // Clean baseline.
  const std::vector<Dataset> base_parts = partition(train_ds, opt.n);
  Ensemble base;
  base.n = opt.n;
  base.global_seed = opt.cfg.seed;
  base.config = opt.cfg;
  base.config_digest = config_digest(opt.cfg, opt.n);
  base.models.resize(opt.n);
  parallel_for(opt.n, jobs, [&](std::size_t i) {
    base.models[i] = train(base_parts[i], opt.cfg, i);
  });
  // Vote labels live in the model output space; example labels in the
  // dataset's. They coincide in practice but are kept apart here.
  const std::uint32_t vote_classes = base.models.front().output_dim();
  const std::uint32_t data_classes = train_ds.num_classes;
  const std::vector<CertRow> rows = certify_dataset(
      base, test_ds, opt.region, opt.use_crown, VoteMode::Pecan, jobs);

  std::vector<std::uint64_t> certified;
  for (std::uint64_t i = 0; i < rows.size(); ++i)
    if (rows[i].row.radius) certified.push_back(i);

  AuditReport report;
  report.test_size = test_ds.size();
  report.certified_rows = certified.size();
  if (certified.empty())
    throw std::runtime_error(
        "audit: baseline certified no test row; nothing to audit");

  const std::uint64_t total = opt.trials + opt.over_budget_trials;
  report.per_trial.resize(total);

  parallel_for(total, jobs, [&](std::size_t t) {
    AuditTrial& trial = report.per_trial[t];
    trial.over_budget = t >= opt.trials;
    Prng rng(derive_seed(opt.seed, t));

    const std::uint64_t row_idx = certified[rng.next_below(certified.size())];
    const CertRow& row = rows[row_idx];
    const std::int64_t radius = *row.row.radius;
    trial.example_id = row.row.example_id;
    trial.radius = radius;
    const std::uint64_t budget =
        trial.over_budget ? std::uint64_t(radius) + 1
                          : rng.next_below(std::uint64_t(radius) + 1);
    trial.budget = budget;

    // Decompose the budget into deletes (1), inserts (1), modifies (2).
    std::uint64_t remaining = budget;
    while (remaining > 0) {
      const std::uint64_t op =
          remaining >= 2 ? rng.next_below(3) : rng.next_below(2);
      if (op == 0)
        ++trial.deletes;
      else if (op == 1)
        ++trial.inserts;
      else
        ++trial.modifies;
      remaining -= op == 2 ? 2 : 1;
    }
    // Victims for deletes and modifies must be distinct rows.
    std::uint64_t victims_needed = trial.deletes + trial.modifies;
    if (victims_needed > train_ds.size()) {
      // Desk-scale budgets never get here; convert the excess to inserts.
      const std::uint64_t excess = victims_needed - train_ds.size();
      trial.inserts += excess;  // 1:1 is within budget (ops cost >= 1 each)
      if (trial.deletes >= excess)
        trial.deletes -= excess;
      else {
        trial.modifies -= excess - trial.deletes;
        trial.deletes = 0;
      }
      victims_needed = trial.deletes + trial.modifies;
    }
    std::vector<std::uint64_t> pool(train_ds.size());
    std::iota(pool.begin(), pool.end(), 0ull);
    for (std::uint64_t j = 0; j < victims_needed; ++j) {
      const std::uint64_t pick = j + rng.next_below(pool.size() - j);
      std::swap(pool[j], pool[pick]);
    }

    // Build the poisoned dataset: in-place modifications, deletions, then
    // appended insertions -- unchanged examples keep their relative order,
    // which is what makes partition-level model reuse exact.
    std::unordered_set<std::uint64_t> affected;
    Dataset poisoned;
    poisoned.feature_dim = train_ds.feature_dim;
    poisoned.num_classes = train_ds.num_classes;
    std::vector<bool> dropped(train_ds.size(), false);
    for (std::uint64_t j = 0; j < trial.deletes; ++j) {
      dropped[pool[j]] = true;
      affected.insert(assign(train_ds.examples[pool[j]], opt.n));
    }
    std::vector<std::pair<std::uint64_t, Example>> modified;
    for (std::uint64_t j = trial.deletes; j < victims_needed; ++j) {
      Example e = train_ds.examples[pool[j]];
      modify_example(e, data_classes, rng);
      affected.insert(assign(train_ds.examples[pool[j]], opt.n));
      affected.insert(assign(e, opt.n));
      modified.emplace_back(pool[j], std::move(e));
    }
    poisoned.examples.reserve(train_ds.size() - trial.deletes + trial.inserts);
    for (std::uint64_t i = 0; i < train_ds.size(); ++i) {
      if (dropped[i]) continue;
      const auto it = std::find_if(
          modified.begin(), modified.end(),
          [&](const auto& p) { return p.first == i; });
      poisoned.examples.push_back(it == modified.end() ? train_ds.examples[i]
                                                       : it->second);
    }
    for (std::uint64_t j = 0; j < trial.inserts; ++j) {
      Example e = random_insert(train_ds.feature_dim, data_classes, rng);
      affected.insert(assign(e, opt.n));
      poisoned.examples.push_back(std::move(e));
    }
    trial.actual_symdiff = symdiff_size(train_ds, poisoned);
    if (!trial.over_budget && trial.actual_symdiff > budget)
      throw audit_violation("audit internal error: perturbation exceeded budget");
    trial.affected_partitions = affected.size();
    if (affected.size() > budget)
      throw audit_violation(
          "audit internal error: affected partitions exceed budget");

    // Retrain only the affected partitions; verify the rest are untouched.
    const std::vector<Dataset> parts = partition(poisoned, opt.n);
    std::vector<MlpModel> models = base.models;
    for (std::uint64_t p = 0; p < opt.n; ++p) {
      if (affected.count(p)) {
        models[p] = train(parts[p], opt.cfg, p);
        continue;
      }
      if (parts[p].size() != base_parts[p].size())
        throw audit_violation("audit locality breach: partition " +
                              std::to_string(p) + " changed size");
      for (std::size_t i = 0; i < parts[p].size(); ++i)
        if (canonical_bytes(parts[p].examples[i]) !=
            canonical_bytes(base_parts[p].examples[i]))
          throw audit_violation("audit locality breach: partition " +
                                std::to_string(p) + " changed content");
    }
    Ensemble hybrid;
    hybrid.models = std::move(models);
    hybrid.n = opt.n;
    hybrid.config = opt.cfg;

    // Sampled evasion trigger within the region.
    const Example& target = test_ds.examples[trial.example_id];
    const std::vector<float> x_tilde =
        sample_trigger(target.features, opt.region, rng, trial.trigger_size);

    const std::vector<Vote> votes = collect_votes(
        hybrid, x_tilde, opt.region, opt.use_crown, VoteMode::Pecan);
    const AggregateResult agg = aggregate(votes, vote_classes);
    trial.violated = agg.y_star != row.row.y_star;

    if (opt.bidirectional && agg.radius) {
      // Reverse direction: the poisoned-side certificate must cover the
      // walk back to the clean data whenever the symmetric difference and
      // the (symmetric) region allow it.
      if (std::int64_t(trial.actual_symdiff) <= *agg.radius) {
        trial.bidir_checked = true;
        trial.bidir_violated = row.row.y_star != agg.y_star;
      }
    }
  });

  for (const AuditTrial& trial : report.per_trial) {
    if (trial.over_budget) {
      ++report.over_budget_trials;
      if (trial.violated) ++report.over_budget_flips;
      continue;
    }
    ++report.trials;
    if (trial.violated) ++report.violations;
    if (trial.bidir_checked) ++report.bidir_checked;
    if (trial.bidir_violated) ++report.bidir_violations;
  }
  return report;
}

void save_audit_report(const AuditReport& report,
                       const std::filesystem::path& path) {
  nlohmann::json per_trial = nlohmann::json::array();
  for (const AuditTrial& t : report.per_trial) {
    per_trial.push_back({{"example_id", t.example_id},
                         {"radius", t.radius},
                         {"budget", t.budget},
                         {"deletes", t.deletes},
                         {"inserts", t.inserts},
                         {"modifies", t.modifies},
                         {"actual_symdiff", t.actual_symdiff},
                         {"affected_partitions", t.affected_partitions},
                         {"trigger_size", t.trigger_size},
                         {"over_budget", t.over_budget},
                         {"violated", t.violated},
                         {"bidir_checked", t.bidir_checked},
                         {"bidir_violated", t.bidir_violated}});
  }
  nlohmann::json j{{"trials", report.trials},
                   {"violations", report.violations},
                   {"bidir_checked", report.bidir_checked},
                   {"bidir_violations", report.bidir_violations},
                   {"over_budget_trials", report.over_budget_trials},
                   {"over_budget_flips", report.over_budget_flips},
                   {"test_size", report.test_size},
                   {"certified_rows", report.certified_rows},
                   {"per_trial", per_trial}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw io_error("write failed on " + path.string());
}

}  // namespace pecan

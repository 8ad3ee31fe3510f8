#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "pecan/data.hpp"

namespace pecan {

// Backdoor trigger: set the listed features to fixed values. Applying it to
// any x moves x by at most |assignments| in l0.
struct TriggerSpec {
  std::vector<std::pair<std::uint32_t, float>> assignments;

  std::uint32_t size() const {
    return static_cast<std::uint32_t>(assignments.size());
  }
  void validate(std::uint32_t feature_dim) const;
};

struct PoisonPlan {
  double poison_fraction = 0.0;
  std::uint32_t target_label = 0;
  std::vector<TriggerSpec> triggers;  // >1 = dynamic backdoor, round-robin
  std::uint64_t seed = 0;
  bool flip_labels = false;  // dirty-label variant (see poison_dataset)
};

std::vector<float> apply_trigger(std::span<const float> x,
                                 const TriggerSpec& t);

// Clean-label backdoor: picks round(fraction*|d|) examples carrying
// target_label by seeded sampling without replacement and stamps the plan's
// triggers on them round-robin (labels untouched). With flip_labels the
// victims are picked among the other classes instead and relabeled to
// target_label -- the classic dirty-label variant. Returns the poisoned
// dataset plus the victim indices (ascending).
std::pair<Dataset, std::vector<std::uint64_t>> poison_dataset(
    const Dataset& d, const PoisonPlan& plan);

// Weight-magnitude trigger selection: trains a seeded one-epoch linear
// softmax surrogate, scores each feature by its weight toward target_label
// (contrast against the class mean), picks the top `size` and assigns each
// the domain endpoint that pushes toward target_label.
TriggerSpec select_trigger_features(const Dataset& d, std::uint32_t size,
                                    std::uint32_t target_label,
                                    std::uint64_t seed);

// Explicit trigger pass-through with validation (distinct indices, values
// clamped to [0,1]).
TriggerSpec make_explicit_trigger(
    const std::vector<std::pair<std::uint32_t, float>>& assignments);

// Audit-side sampler of the perturbation space: deletes num_delete
// seeded-random examples, then appends num_insert examples drawn from
// insert_source (with replacement), or label-flipped copies of d's own
// examples when insert_source is null.
Dataset perturb_dataset(const Dataset& d, std::uint64_t num_delete,
                        std::uint64_t num_insert,
                        const Dataset* insert_source, std::uint64_t seed);

// JSON persistence ({"assignments":[[idx,value],...]}; plan adds the scalar
// fields and a "triggers" array).
void save_trigger(const TriggerSpec& t, const std::filesystem::path& path);
TriggerSpec load_trigger(const std::filesystem::path& path);
void save_poison_plan(const PoisonPlan& p, const std::filesystem::path& path);
PoisonPlan load_poison_plan(const std::filesystem::path& path);

}  // namespace pecan

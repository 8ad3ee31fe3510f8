#include "pecan/attack.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "pecan/errors.hpp"
#include "pecan/prng.hpp"

namespace pecan {

void TriggerSpec::validate(std::uint32_t feature_dim) const {
  std::unordered_set<std::uint32_t> seen;
  for (const auto& [idx, value] : assignments) {
    if (idx >= feature_dim)
      throw std::out_of_range("trigger feature index " + std::to_string(idx) +
                              " out of range (dim " +
                              std::to_string(feature_dim) + ")");
    if (!seen.insert(idx).second)
      throw std::invalid_argument("trigger assigns feature " +
                                  std::to_string(idx) + " twice");
    if (!(value >= 0.0f) || value > 1.0f)
      throw std::invalid_argument("trigger value outside [0,1]");
  }
}

std::vector<float> apply_trigger(std::span<const float> x,
                                 const TriggerSpec& t) {
  t.validate(static_cast<std::uint32_t>(x.size()));
  std::vector<float> out(x.begin(), x.end());
  for (const auto& [idx, value] : t.assignments) out[idx] = value;
  return out;
}

std::pair<Dataset, std::vector<std::uint64_t>> poison_dataset(
    const Dataset& d, const PoisonPlan& plan) {
  if (plan.poison_fraction < 0.0 || plan.poison_fraction > 1.0)
    throw std::invalid_argument("poison_fraction must be in [0, 1]");
  if (plan.target_label >= d.num_classes)
    throw std::invalid_argument("target_label out of range");
  if (plan.triggers.empty())
    throw std::invalid_argument("poison plan has no triggers");
  for (const auto& t : plan.triggers) t.validate(d.feature_dim);

  const std::uint64_t count = static_cast<std::uint64_t>(
      std::llround(plan.poison_fraction * double(d.size())));
  std::vector<std::uint64_t> candidates;
  for (std::uint64_t i = 0; i < d.size(); ++i) {
    const bool is_target = d.examples[i].label == plan.target_label;
    if (plan.flip_labels ? !is_target : is_target) candidates.push_back(i);
  }
  if (candidates.size() < count)
    throw std::invalid_argument(
        "not enough candidate examples to poison: need " +
        std::to_string(count) + ", have " + std::to_string(candidates.size()));

  Prng rng(plan.seed);
  rng.shuffle(candidates);
  std::vector<std::uint64_t> victims(candidates.begin(),
                                     candidates.begin() + count);
  std::sort(victims.begin(), victims.end());

  Dataset out = d;
  for (std::uint64_t j = 0; j < victims.size(); ++j) {
    Example& e = out.examples[victims[j]];
    const TriggerSpec& t = plan.triggers[j % plan.triggers.size()];
    e.features = apply_trigger(e.features, t);
    if (plan.flip_labels) e.label = plan.target_label;
  }
  return {std::move(out), std::move(victims)};
}

TriggerSpec select_trigger_features(const Dataset& d, std::uint32_t size,
                                    std::uint32_t target_label,
                                    std::uint64_t seed) {
  if (size > d.feature_dim)
    throw std::invalid_argument("trigger size exceeds feature_dim");
  if (target_label >= d.num_classes)
    throw std::invalid_argument("target_label out of range");
  if (d.empty()) throw std::invalid_argument("cannot fit surrogate: empty dataset");

  // One epoch of seeded SGD on a linear softmax model, zero init.
  const std::uint32_t C = d.num_classes;
  const std::uint32_t dim = d.feature_dim;
  std::vector<double> W(std::size_t(C) * dim, 0.0);
  std::vector<double> b(C, 0.0);
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  Prng rng(seed);
  rng.shuffle(order);
  const double lr = 0.5;
  std::vector<double> p(C);
  for (std::size_t idx : order) {
    const Example& e = d.examples[idx];
    double mx = b[0];
    for (std::uint32_t k = 0; k < C; ++k) {
      double z = b[k];
      const double* row = W.data() + std::size_t(k) * dim;
      for (std::uint32_t i = 0; i < dim; ++i) z += row[i] * e.features[i];
      p[k] = z;
      mx = std::max(mx, z);
    }
    double sum = 0.0;
    for (std::uint32_t k = 0; k < C; ++k) {
      p[k] = std::exp(p[k] - mx);
      sum += p[k];
    }
    for (std::uint32_t k = 0; k < C; ++k) {
      const double g = p[k] / sum - (k == e.label ? 1.0 : 0.0);
      b[k] -= lr * g;
      double* row = W.data() + std::size_t(k) * dim;
      for (std::uint32_t i = 0; i < dim; ++i)
        row[i] -= lr * g * e.features[i];
    }
  }

  // Importance: weight toward the target class relative to the class mean
  // (softmax weights are only defined up to a shared per-feature offset).
  std::vector<std::pair<double, std::uint32_t>> ranked(dim);
  for (std::uint32_t i = 0; i < dim; ++i) {
    double mean = 0.0;
    for (std::uint32_t k = 0; k < C; ++k) mean += W[std::size_t(k) * dim + i];
    mean /= double(C);
    const double imp = W[std::size_t(target_label) * dim + i] - mean;
    ranked[i] = {imp, i};
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    const double ma = std::abs(a.first);
    const double mb = std::abs(b.first);
    return ma > mb || (ma == mb && a.second < b.second);
  });
  TriggerSpec t;
  t.assignments.reserve(size);
  for (std::uint32_t r = 0; r < size; ++r) {
    const auto [imp, i] = ranked[r];
    t.assignments.emplace_back(i, imp > 0.0 ? 1.0f : 0.0f);
  }
  std::sort(t.assignments.begin(), t.assignments.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return t;
}

TriggerSpec make_explicit_trigger(
    const std::vector<std::pair<std::uint32_t, float>>& assignments) {
  TriggerSpec t;
  t.assignments = assignments;
  std::unordered_set<std::uint32_t> seen;
  for (auto& [idx, value] : t.assignments) {
    if (!seen.insert(idx).second)
      throw std::invalid_argument("trigger assigns feature " +
                                  std::to_string(idx) + " twice");
    value = clamp01(value);
  }
  return t;
}

Dataset perturb_dataset(const Dataset& d, std::uint64_t num_delete,
                        std::uint64_t num_insert,
                        const Dataset* insert_source, std::uint64_t seed) {
  if (num_delete > d.size())
    throw std::invalid_argument("perturb_dataset: num_delete > |d|");
  if (insert_source && num_insert > 0 && insert_source->empty())
    throw std::invalid_argument("perturb_dataset: empty insert_source");
  if (!insert_source && num_insert > 0 && d.empty())
    throw std::invalid_argument("perturb_dataset: nothing to copy-insert");

  Prng rng(seed);
  std::vector<std::uint64_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  std::vector<bool> dropped(d.size(), false);
  for (std::uint64_t j = 0; j < num_delete; ++j) dropped[idx[j]] = true;

  Dataset out;
  out.feature_dim = d.feature_dim;
  out.num_classes = d.num_classes;
  out.examples.reserve(d.size() - num_delete + num_insert);
  for (std::uint64_t i = 0; i < d.size(); ++i)
    if (!dropped[i]) out.examples.push_back(d.examples[i]);

  for (std::uint64_t j = 0; j < num_insert; ++j) {
    if (insert_source) {
      out.examples.push_back(
          insert_source->examples[rng.next_below(insert_source->size())]);
    } else {
      Example e = d.examples[rng.next_below(d.size())];
      // flip to a uniformly random *different* label
      e.label = static_cast<std::uint32_t>(
          (e.label + 1 + rng.next_below(d.num_classes - 1)) % d.num_classes);
      out.examples.push_back(std::move(e));
    }
  }
  return out;
}

namespace {

nlohmann::json trigger_to_json(const TriggerSpec& t) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [idx, value] : t.assignments)
    arr.push_back({idx, value});
  return {{"assignments", arr}};
}

TriggerSpec trigger_from_json(const nlohmann::json& j) {
  TriggerSpec t;
  for (const auto& pair : j.at("assignments")) {
    if (!pair.is_array() || pair.size() != 2)
      throw format_error("trigger assignment must be [index, value]");
    t.assignments.emplace_back(pair[0].get<std::uint32_t>(),
                               pair[1].get<float>());
  }
  return t;
}

nlohmann::json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw format_error(path.string() + ": " + ex.what());
  }
  return j;
}

void dump_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw io_error("write failed on " + path.string());
}

}  // namespace

void save_trigger(const TriggerSpec& t, const std::filesystem::path& path) {
  dump_json(trigger_to_json(t), path);
}

TriggerSpec load_trigger(const std::filesystem::path& path) {
  try {
    return trigger_from_json(load_json(path));
  } catch (const nlohmann::json::exception& ex) {
    throw format_error(path.string() + ": " + ex.what());
  }
}

void save_poison_plan(const PoisonPlan& p, const std::filesystem::path& path) {
  nlohmann::json triggers = nlohmann::json::array();
  for (const auto& t : p.triggers) triggers.push_back(trigger_to_json(t));
  dump_json({{"poison_fraction", p.poison_fraction},
             {"target_label", p.target_label},
             {"triggers", triggers},
             {"seed", p.seed},
             {"flip_labels", p.flip_labels}},
            path);
}

PoisonPlan load_poison_plan(const std::filesystem::path& path) {
  const nlohmann::json j = load_json(path);
  PoisonPlan p;
  try {
    p.poison_fraction = j.at("poison_fraction").get<double>();
    p.target_label = j.at("target_label").get<std::uint32_t>();
    for (const auto& t : j.at("triggers")) p.triggers.push_back(trigger_from_json(t));
    p.seed = j.at("seed").get<std::uint64_t>();
    p.flip_labels = j.value("flip_labels", false);
  } catch (const nlohmann::json::exception& ex) {
    throw format_error(path.string() + ": " + ex.what());
  }
  return p;
}

}  // namespace pecan

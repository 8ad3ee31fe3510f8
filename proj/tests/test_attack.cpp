#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "pecan/attack.hpp"
#include "pecan/data.hpp"
#include "pecan/errors.hpp"
#include "pecan/prng.hpp"

using namespace pecan;
using testutil::TempDir;

namespace {

Dataset uniform_rows(std::size_t n, std::uint32_t label,
                     std::vector<float> features) {
  Dataset d;
  d.feature_dim = std::uint32_t(features.size());
  d.num_classes = 2;
  for (std::size_t i = 0; i < n; ++i) d.examples.push_back({features, label});
  return d;
}

}  // namespace

TEST_CASE("apply_trigger") {
  std::vector<float> x = {0.5f, 0.2f, 0.7f};
  TriggerSpec t = make_explicit_trigger({{0, 1.0f}, {2, 0.0f}});
  std::vector<float> out = apply_trigger(x, t);
  CHECK(out == std::vector<float>{1.0f, 0.2f, 0.0f});
  CHECK(x == std::vector<float>{0.5f, 0.2f, 0.7f});  // input untouched

  int moved = 0;
  for (std::size_t i = 0; i < x.size(); ++i) moved += out[i] != x[i];
  CHECK(moved <= int(t.size()));

  TriggerSpec empty;
  CHECK(apply_trigger(x, empty) == x);

  TriggerSpec same = make_explicit_trigger({{1, 0.2f}});
  CHECK(apply_trigger(x, same) == x);  // still a size-1 trigger
  CHECK(same.size() == 1);
}

TEST_CASE("trigger validation") {
  std::vector<float> x = {0.5f, 0.5f};
  TriggerSpec oor;
  oor.assignments = {{5, 0.5f}};
  CHECK_THROWS_AS((void)apply_trigger(x, oor), std::out_of_range);

  TriggerSpec bad_value;
  bad_value.assignments = {{0, 1.5f}};
  CHECK_THROWS_AS((void)apply_trigger(x, bad_value), std::invalid_argument);

  CHECK_THROWS_AS((void)make_explicit_trigger({{0, 0.1f}, {0, 0.2f}}),
                  std::invalid_argument);
  // Explicit triggers clamp instead of rejecting out-of-domain values.
  TriggerSpec clamped = make_explicit_trigger({{0, 7.0f}});
  CHECK(clamped.assignments[0].second == 1.0f);
}

TEST_CASE("poison_dataset clean-label") {
  Dataset d = synth_blobs(2, 2, 500, 0.1, 3);  // 1000 rows
  PoisonPlan plan;
  plan.poison_fraction = 0.001;
  plan.target_label = 1;
  plan.triggers = {make_explicit_trigger({{0, 1.0f}})};
  plan.seed = 12;

  auto [poisoned, victims] = poison_dataset(d, plan);
  REQUIRE(victims.size() == 1);  // round(0.001 * 1000)
  const std::uint64_t v = victims[0];
  CHECK(d.examples[v].label == 1);              // clean label: target class
  CHECK(poisoned.examples[v].label == 1);       // label untouched
  CHECK(poisoned.examples[v].features[0] == 1.0f);
  for (std::uint64_t i = 0; i < d.size(); ++i)
    if (i != v) CHECK(poisoned.examples[i] == d.examples[i]);

  SUBCASE("fraction 0 is the identity") {
    plan.poison_fraction = 0.0;
    auto [same, none] = poison_dataset(d, plan);
    CHECK(none.empty());
    CHECK(symdiff_size(same, d) == 0);
  }
  SUBCASE("seeded selection is deterministic") {
    plan.poison_fraction = 0.01;
    auto [a, va] = poison_dataset(d, plan);
    auto [b, vb] = poison_dataset(d, plan);
    CHECK(va == vb);
    CHECK(symdiff_size(a, b) == 0);
    plan.seed = 13;
    auto [c, vc] = poison_dataset(d, plan);
    CHECK(va != vc);
  }
}

TEST_CASE("poison_dataset dirty-label variant relabels victims") {
  Dataset d = synth_blobs(2, 2, 100, 0.1, 6);
  PoisonPlan plan;
  plan.poison_fraction = 0.02;
  plan.target_label = 1;
  plan.triggers = {make_explicit_trigger({{1, 1.0f}})};
  plan.seed = 2;
  plan.flip_labels = true;

  auto [poisoned, victims] = poison_dataset(d, plan);
  REQUIRE(victims.size() == 4);  // round(0.02 * 200)
  for (std::uint64_t v : victims) {
    CHECK(d.examples[v].label != 1);        // picked from the other classes
    CHECK(poisoned.examples[v].label == 1);  // relabeled to the target
    CHECK(poisoned.examples[v].features[1] == 1.0f);
  }
}

TEST_CASE("poison_dataset stamps multiple triggers round-robin") {
  Dataset d = uniform_rows(4, 0, {0.5f, 0.5f});
  PoisonPlan plan;
  plan.poison_fraction = 1.0;
  plan.target_label = 0;
  plan.triggers = {make_explicit_trigger({{0, 1.0f}}),
                   make_explicit_trigger({{1, 1.0f}})};
  plan.seed = 1;

  auto [poisoned, victims] = poison_dataset(d, plan);
  REQUIRE(victims == std::vector<std::uint64_t>{0, 1, 2, 3});
  CHECK(poisoned.examples[0].features == std::vector<float>{1.0f, 0.5f});
  CHECK(poisoned.examples[1].features == std::vector<float>{0.5f, 1.0f});
  CHECK(poisoned.examples[2].features == std::vector<float>{1.0f, 0.5f});
  CHECK(poisoned.examples[3].features == std::vector<float>{0.5f, 1.0f});
}

TEST_CASE("poison_dataset argument checks") {
  Dataset d = uniform_rows(10, 0, {0.5f});
  PoisonPlan plan;
  plan.poison_fraction = 1.0;
  plan.target_label = 1;  // no class-1 rows to poison
  plan.triggers = {make_explicit_trigger({{0, 1.0f}})};
  CHECK_THROWS_AS((void)poison_dataset(d, plan), std::invalid_argument);

  plan.target_label = 0;
  plan.triggers.clear();
  CHECK_THROWS_AS((void)poison_dataset(d, plan), std::invalid_argument);

  plan.triggers = {make_explicit_trigger({{0, 1.0f}})};
  plan.poison_fraction = 1.5;
  CHECK_THROWS_AS((void)poison_dataset(d, plan), std::invalid_argument);

  plan.poison_fraction = 0.5;
  plan.target_label = 7;
  CHECK_THROWS_AS((void)poison_dataset(d, plan), std::invalid_argument);
}

TEST_CASE("select_trigger_features finds the discriminative feature") {
  // Feature 0 is noise; feature 1 separates the classes cleanly.
  Dataset d;
  d.feature_dim = 2;
  d.num_classes = 2;
  Prng rng(55);
  for (int i = 0; i < 100; ++i) {
    const std::uint32_t label = i % 2;
    d.examples.push_back(
        {{float(rng.next_double()), label ? 0.9f : 0.1f}, label});
  }

  TriggerSpec t = select_trigger_features(d, 1, 1, 7);
  REQUIRE(t.size() == 1);
  CHECK(t.assignments[0].first == 1);
  CHECK(t.assignments[0].second == 1.0f);  // pushes toward the target class

  SUBCASE("deterministic under the seed") {
    TriggerSpec again = select_trigger_features(d, 1, 1, 7);
    CHECK(again.assignments == t.assignments);
  }
  SUBCASE("size 0 trigger is empty") {
    CHECK(select_trigger_features(d, 0, 1, 7).assignments.empty());
  }
  SUBCASE("full-width trigger has distinct ascending indices") {
    TriggerSpec full = select_trigger_features(d, 2, 0, 7);
    REQUIRE(full.size() == 2);
    CHECK(full.assignments[0].first == 0);
    CHECK(full.assignments[1].first == 1);
  }
  SUBCASE("argument checks") {
    CHECK_THROWS_AS((void)select_trigger_features(d, 3, 1, 7),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)select_trigger_features(d, 1, 5, 7),
                    std::invalid_argument);
    Dataset empty;
    empty.feature_dim = 2;
    empty.num_classes = 2;
    CHECK_THROWS_AS((void)select_trigger_features(empty, 1, 1, 7),
                    std::invalid_argument);
  }
}

TEST_CASE("perturb_dataset samples the symmetric-difference ball") {
  Dataset d = synth_blobs(2, 2, 25, 0.1, 14);  // 50 rows
  Dataset source = synth_blobs(2, 2, 10, 0.1, 99);

  SUBCASE("no-op") {
    Dataset same = perturb_dataset(d, 0, 0, nullptr, 1);
    CHECK(symdiff_size(same, d) == 0);
  }
  SUBCASE("one deletion") {
    Dataset del = perturb_dataset(d, 1, 0, nullptr, 1);
    CHECK(del.size() == 49);
    CHECK(symdiff_size(del, d) == 1);
  }
  SUBCASE("delete one, insert one from a disjoint source") {
    Dataset mod = perturb_dataset(d, 1, 1, &source, 1);
    CHECK(mod.size() == 50);
    CHECK(symdiff_size(mod, d) == 2);
  }
  SUBCASE("insert without a source flips a copied label") {
    Dataset ins = perturb_dataset(d, 0, 1, nullptr, 1);
    CHECK(ins.size() == 51);
    // The flipped copy cannot collide with a clean blob row.
    CHECK(symdiff_size(ins, d) == 1);
  }
  SUBCASE("deterministic under the seed") {
    Dataset a = perturb_dataset(d, 3, 2, &source, 8);
    Dataset b = perturb_dataset(d, 3, 2, &source, 8);
    CHECK(symdiff_size(a, b) == 0);
  }
  SUBCASE("argument checks") {
    CHECK_THROWS_AS((void)perturb_dataset(d, 51, 0, nullptr, 1),
                    std::invalid_argument);
    Dataset empty;
    empty.feature_dim = 2;
    empty.num_classes = 2;
    CHECK_THROWS_AS((void)perturb_dataset(d, 0, 1, &empty, 1),
                    std::invalid_argument);
  }
}

TEST_CASE("trigger and plan JSON round trips") {
  TempDir tmp;
  TriggerSpec t = make_explicit_trigger({{3, 0.25f}, {1, 1.0f}});
  save_trigger(t, tmp / "t.json");
  TriggerSpec t2 = load_trigger(tmp / "t.json");
  CHECK(t2.assignments == t.assignments);

  PoisonPlan p;
  p.poison_fraction = 0.005;
  p.target_label = 2;
  p.triggers = {t, make_explicit_trigger({{0, 0.0f}})};
  p.seed = 42;
  p.flip_labels = true;
  save_poison_plan(p, tmp / "p.json");
  PoisonPlan p2 = load_poison_plan(tmp / "p.json");
  CHECK(p2.poison_fraction == p.poison_fraction);
  CHECK(p2.target_label == p.target_label);
  REQUIRE(p2.triggers.size() == 2);
  CHECK(p2.triggers[0].assignments == t.assignments);
  CHECK(p2.seed == 42);
  CHECK(p2.flip_labels);

  SUBCASE("malformed input") {
    std::ofstream(tmp / "bad.json") << "{not json";
    CHECK_THROWS_AS((void)load_trigger(tmp / "bad.json"), format_error);
    std::ofstream(tmp / "shape.json") << R"({"assignments": [[1]]})";
    CHECK_THROWS_AS((void)load_trigger(tmp / "shape.json"), format_error);
    std::ofstream(tmp / "missing.json") << R"({"seed": 1})";
    CHECK_THROWS_AS((void)load_poison_plan(tmp / "missing.json"),
                    format_error);
    CHECK_THROWS_AS((void)load_trigger(tmp / "nope.json"), io_error);
  }
}

// pecan -- partition-and-certify ensemble defense CLI.
//
// Subcommands: partition, train, certify, evaluate, attack, audit.
// Exit codes: 0 ok, 1 invariant/audit violation, 2 usage/config, 3 I/O.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pecan/attack.hpp"
#include "pecan/audit.hpp"
#include "pecan/data.hpp"
#include "pecan/ensemble.hpp"
#include "pecan/errors.hpp"
#include "pecan/metrics.hpp"
#include "pecan/partition.hpp"

namespace {

using pecan::config_error;

// ---------------------------------------------------------------------------
// dataset source flags (shared by several subcommands; `prefix` distinguishes
// the train-side and test-side groups of the attack/audit commands)

struct DataOpts {
  std::string prefix;
  std::string csv;
  std::uint32_t num_classes = 0;
  bool normalize = false;
  std::string idx_images;
  std::string idx_labels;
  std::uint32_t synth_classes = 0;
  std::uint32_t synth_dim = 2;
  std::uint32_t synth_per_class = 0;
  double synth_spread = 0.1;
  std::uint64_t synth_seed = 1;
  std::uint64_t limit = 0;  // 0 = keep everything
};

void add_data_opts(CLI::App* cmd, DataOpts& o, const std::string& prefix,
                   const std::string& what) {
  o.prefix = prefix;
  auto flag = [&prefix](const char* name) { return "--" + prefix + name; };
  cmd->add_option(flag("data-csv"), o.csv,
                  what + ": CSV file, feature columns then an integer label");
  cmd->add_option(flag("num-classes"), o.num_classes,
                  "label count of the CSV " + what);
  cmd->add_flag(flag("normalize"), o.normalize,
                "min-max scale the CSV columns into [0,1]");
  cmd->add_option(flag("idx-images"), o.idx_images,
                  what + ": IDX image file (pairs with " + flag("idx-labels") +
                      ")");
  cmd->add_option(flag("idx-labels"), o.idx_labels, what + ": IDX label file");
  cmd->add_option(flag("synth-classes"), o.synth_classes,
                  what + ": synthetic blob class count");
  cmd->add_option(flag("synth-dim"), o.synth_dim,
                  "synthetic blob feature dimension");
  cmd->add_option(flag("synth-per-class"), o.synth_per_class,
                  "synthetic blob examples per class");
  cmd->add_option(flag("synth-spread"), o.synth_spread,
                  "synthetic blob half-width around each class center");
  cmd->add_option(flag("synth-seed"), o.synth_seed, "synthetic blob seed");
  cmd->add_option(flag("limit"), o.limit,
                  "keep only the first k examples of the " + what);
}

pecan::Dataset load_data(const DataOpts& o) {
  auto flag = [&o](const char* name) { return "--" + o.prefix + name; };
  int sources = 0;
  if (!o.csv.empty()) ++sources;
  if (!o.idx_images.empty() || !o.idx_labels.empty()) ++sources;
  if (o.synth_classes != 0 || o.synth_per_class != 0) ++sources;
  if (sources == 0) {
    throw config_error("missing dataset: give " + flag("data-csv") + ", " +
                       flag("idx-images") + "/" + flag("idx-labels") + " or " +
                       flag("synth-classes") + "/" + flag("synth-per-class"));
  }
  if (sources > 1) {
    throw config_error("conflicting dataset sources for " + flag("data-csv") +
                       " group: give exactly one of csv / idx / synth");
  }

  pecan::Dataset d;
  if (!o.csv.empty()) {
    if (o.num_classes == 0) {
      throw config_error(flag("num-classes") + " is required with " +
                         flag("data-csv"));
    }
    d = pecan::load_csv(o.csv, o.num_classes, o.normalize);
  } else if (!o.idx_images.empty() || !o.idx_labels.empty()) {
    if (o.idx_images.empty() || o.idx_labels.empty()) {
      throw config_error(flag("idx-images") + " and " + flag("idx-labels") +
                         " must be given together");
    }
    d = pecan::load_idx(o.idx_images, o.idx_labels);
  } else {
    if (o.synth_classes == 0 || o.synth_per_class == 0) {
      throw config_error(flag("synth-classes") + " and " +
                         flag("synth-per-class") + " must both be positive");
    }
    d = pecan::synth_blobs(o.synth_classes, o.synth_dim, o.synth_per_class,
                           o.synth_spread, o.synth_seed);
  }
  if (o.limit > 0 && o.limit < d.size()) {
    d.examples.resize(o.limit);
  }
  return d;
}

// ---------------------------------------------------------------------------
// region flags

struct RegionOpts {
  std::string norm = "l0";
  double eps = 0.0;
  std::uint32_t s = 0;
};

void add_region_opts(CLI::App* cmd, RegionOpts& o) {
  cmd->add_option("--norm", o.norm, "perturbation region kind")
      ->check(CLI::IsMember({"l0", "linf"}));
  cmd->add_option("--eps", o.eps, "linf radius");
  cmd->add_option("--s", o.s, "l0 budget: features an attacker may rewrite");
}

pecan::RegionSpec make_region(const RegionOpts& o) {
  pecan::RegionSpec spec;
  spec.kind = pecan::region_kind_from_string(o.norm);
  spec.eps = o.eps;
  spec.s = o.s;
  return spec;
}

// ---------------------------------------------------------------------------
// training flags

struct TrainOpts {
  std::string dims;
  std::uint64_t seed = 0;
  std::uint32_t epochs_warmup = 1;
  std::uint32_t epochs_mixed = 0;
  std::uint32_t epochs_full = 0;
  std::uint32_t batch_size = 64;
  float lr = 0.05f;
  float momentum = 0.9f;
  std::string norm_train = "l0";
  double eps_train = 0.0;
  std::uint32_t s_train = 0;
  double kappa_start = 1.0;
  double kappa_end = 0.5;
};

void add_train_opts(CLI::App* cmd, TrainOpts& o) {
  cmd->add_option("--dims", o.dims,
                  "layer widths, comma separated (input,...,classes)")
      ->required();
  cmd->add_option("--seed", o.seed, "global training seed");
  cmd->add_option("--epochs-warmup", o.epochs_warmup,
                  "natural-loss epochs before the robust ramp");
  cmd->add_option("--epochs-mixed", o.epochs_mixed,
                  "epochs ramping in the robust loss and region size");
  cmd->add_option("--epochs-full", o.epochs_full, "full robust-loss epochs");
  cmd->add_option("--batch-size", o.batch_size, "SGD minibatch size");
  cmd->add_option("--lr", o.lr, "learning rate");
  cmd->add_option("--momentum", o.momentum, "SGD momentum in [0,1)");
  cmd->add_option("--norm-train", o.norm_train, "training region kind")
      ->check(CLI::IsMember({"l0", "linf"}));
  cmd->add_option("--eps-train", o.eps_train, "training linf radius target");
  cmd->add_option("--s-train", o.s_train, "training l0 budget target");
  cmd->add_option("--kappa-start", o.kappa_start,
                  "natural share of the robust loss at ramp start");
  cmd->add_option("--kappa-end", o.kappa_end,
                  "natural share of the robust loss at ramp end");
}

std::vector<std::uint32_t> parse_dims(const std::string& s) {
  std::vector<std::uint32_t> dims;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    std::uint32_t v = 0;
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + comma, v);
    if (ec != std::errc() || p != s.data() + comma || v == 0) {
      throw config_error("--dims: expected comma-separated positive layer "
                         "widths, got '" +
                         s + "'");
    }
    dims.push_back(v);
    pos = comma + 1;
  }
  if (dims.size() < 2) {
    throw config_error("--dims: need at least input and output widths");
  }
  return dims;
}

pecan::TrainConfig make_train_config(const TrainOpts& o) {
  pecan::TrainConfig cfg;
  cfg.layer_dims = parse_dims(o.dims);
  cfg.seed = o.seed;
  cfg.epochs_warmup = o.epochs_warmup;
  cfg.epochs_mixed = o.epochs_mixed;
  cfg.epochs_full = o.epochs_full;
  cfg.batch_size = o.batch_size;
  cfg.learning_rate = o.lr;
  cfg.momentum = o.momentum;
  cfg.region_kind = pecan::region_kind_from_string(o.norm_train);
  cfg.eps_train = o.eps_train;
  cfg.s_train = o.s_train;
  cfg.kappa_start = o.kappa_start;
  cfg.kappa_end = o.kappa_end;
  return cfg;
}

std::vector<double> parse_r_grid(const std::string& s) {
  std::vector<double> grid;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + comma, v);
    if (ec != std::errc() || p != s.data() + comma || v < 0.0) {
      throw config_error("--r-grid: expected comma-separated non-negative "
                         "percentages, got '" +
                         s + "'");
    }
    grid.push_back(v);
    pos = comma + 1;
  }
  return grid;
}

pecan::TriggerSpec parse_trigger_arg(const std::string& s) {
  // "idx=value[,idx=value...]"
  std::vector<std::pair<std::uint32_t, float>> assignments;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    std::size_t eq = s.find('=', pos);
    if (eq == std::string::npos || eq >= comma) {
      throw config_error("--trigger: expected idx=value pairs, got '" + s +
                         "'");
    }
    std::uint32_t idx = 0;
    float val = 0.0f;
    auto [p1, ec1] = std::from_chars(s.data() + pos, s.data() + eq, idx);
    auto [p2, ec2] = std::from_chars(s.data() + eq + 1, s.data() + comma, val);
    if (ec1 != std::errc() || p1 != s.data() + eq || ec2 != std::errc() ||
        p2 != s.data() + comma) {
      throw config_error("--trigger: expected idx=value pairs, got '" + s +
                         "'");
    }
    assignments.emplace_back(idx, val);
    pos = comma + 1;
  }
  return pecan::make_explicit_trigger(assignments);
}

// ---------------------------------------------------------------------------
// subcommand bodies

struct PartitionArgs {
  DataOpts data;
  std::uint64_t n = 0;
  std::string out;
};

int cmd_partition(const PartitionArgs& a) {
  pecan::Dataset d = load_data(a.data);
  pecan::PartitionPlan plan = pecan::make_partition_plan(d, a.n);
  if (!a.out.empty()) pecan::save_partition_plan(plan, a.out);

  std::vector<std::uint64_t> counts(a.n, 0);
  for (std::uint64_t p : plan.assignments) ++counts[p];
  std::uint64_t empty = 0, lo = d.size(), hi = 0;
  for (std::uint64_t c : counts) {
    if (c == 0) ++empty;
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  std::printf("partitioned %zu examples into %llu parts (sizes %llu..%llu, "
              "%llu empty)\n",
              d.size(), static_cast<unsigned long long>(a.n),
              static_cast<unsigned long long>(lo),
              static_cast<unsigned long long>(hi),
              static_cast<unsigned long long>(empty));
  if (!a.out.empty()) std::printf("plan -> %s\n", a.out.c_str());
  return 0;
}

struct TrainArgs {
  DataOpts data;
  TrainOpts train;
  std::uint64_t n = 1;
  std::string mode = "pecan";
  std::string out;
  unsigned jobs = 0;
};

int cmd_train(const TrainArgs& a) {
  pecan::Dataset d = load_data(a.data);
  pecan::TrainConfig cfg = make_train_config(a.train);
  pecan::VoteMode mode = pecan::vote_mode_from_string(a.mode);
  std::uint64_t n = mode == pecan::VoteMode::EvasionOnly ? 1 : a.n;
  if (n == 0) throw config_error("--n must be positive");

  pecan::Ensemble ens = pecan::train_ensemble(d, cfg, n, a.jobs);
  pecan::save_ensemble(ens, a.out);
  std::printf("trained %llu models on %zu examples -> %s\n",
              static_cast<unsigned long long>(ens.n), d.size(), a.out.c_str());
  std::printf("config digest %s\n", ens.config_digest.c_str());
  return 0;
}

struct CertifyArgs {
  std::string ensemble_dir;
  DataOpts data;
  RegionOpts region;
  std::string mode = "pecan";
  bool use_crown = false;
  std::string out;
  unsigned jobs = 0;
};

int cmd_certify(const CertifyArgs& a) {
  pecan::Ensemble ens = pecan::load_ensemble(a.ensemble_dir);
  pecan::Dataset test = load_data(a.data);
  pecan::RegionSpec spec = make_region(a.region);
  pecan::VoteMode mode = pecan::vote_mode_from_string(a.mode);

  auto rows = pecan::certify_dataset(ens, test, spec, a.use_crown, mode,
                                     a.jobs);
  pecan::save_results_csv(rows, mode, a.out);

  std::uint64_t certified = 0, correct = 0;
  for (const auto& r : rows) {
    if (r.row.radius) ++certified;
    if (r.row.y_star == r.row.true_label) ++correct;
  }
  std::printf("certified %zu rows (mode %s): %llu with a certificate, %llu "
              "correct -> %s\n",
              rows.size(), pecan::to_string(mode).c_str(),
              static_cast<unsigned long long>(certified),
              static_cast<unsigned long long>(correct), a.out.c_str());
  return 0;
}

struct EvaluateArgs {
  std::string results;
  std::uint64_t train_size = 0;
  std::string r_grid = "0";
  std::string out;
  bool self_check = false;
};

int cmd_evaluate(const EvaluateArgs& a) {
  pecan::ResultsFile rf = pecan::load_results_csv(a.results);
  std::vector<pecan::ResultRow> rows = pecan::to_result_rows(rf.rows);
  if (a.train_size == 0) throw config_error("--train-size must be positive");
  std::vector<double> grid = parse_r_grid(a.r_grid);

  auto curve = pecan::metric_curve(rows, a.train_size, grid);

  if (a.self_check) {
    // The three rates partition the rows, and raising R can only shrink the
    // qualifying set; both facts are hard invariants of the metric
    // definitions, so a miss here is a bug, not a data property.
    std::vector<std::size_t> order(curve.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&curve](std::size_t x,
                                                   std::size_t y) {
      return curve[x].R < curve[y].R;
    });
    double prev_ca = 2.0;
    for (std::size_t i : order) {
      const auto& p = curve[i];
      double sum = p.certified_accuracy + p.asr + p.abstention_rate;
      if (std::abs(sum - 1.0) > 1e-12) {
        throw pecan::audit_violation(
            "self-check: certified_accuracy + asr + abstention_rate = " +
            std::to_string(sum) + " at R=" + std::to_string(p.R));
      }
      if (p.certified_accuracy > prev_ca + 1e-12) {
        throw pecan::audit_violation(
            "self-check: certified accuracy increased at R=" +
            std::to_string(p.R));
      }
      prev_ca = p.certified_accuracy;
    }
  }

  if (!a.out.empty()) pecan::save_metric_curve(curve, a.out);
  std::printf("R,certified_accuracy,normal_accuracy,asr,abstention_rate\n");
  for (const auto& p : curve) {
    std::printf("%g,%.6f,%.6f,%.6f,%.6f\n", p.R, p.certified_accuracy,
                p.normal_accuracy, p.asr, p.abstention_rate);
  }
  return 0;
}

struct AttackArgs {
  DataOpts train_data;
  DataOpts test_data;
  double poison_fraction = 0.0;
  std::uint32_t target_label = 0;
  bool flip_labels = false;
  std::vector<std::string> explicit_triggers;
  std::uint32_t trigger_size = 0;
  std::uint32_t num_triggers = 1;
  std::uint64_t seed = 0;
  std::string out_dir;
};

int cmd_attack(const AttackArgs& a) {
  pecan::Dataset train = load_data(a.train_data);

  pecan::PoisonPlan plan;
  plan.poison_fraction = a.poison_fraction;
  plan.target_label = a.target_label;
  plan.seed = a.seed;
  plan.flip_labels = a.flip_labels;

  if (!a.explicit_triggers.empty()) {
    if (a.trigger_size != 0) {
      throw config_error("--trigger and --trigger-size are exclusive");
    }
    for (const auto& s : a.explicit_triggers) {
      plan.triggers.push_back(parse_trigger_arg(s));
    }
  } else {
    if (a.trigger_size == 0 || a.num_triggers == 0) {
      throw config_error("give --trigger idx=val[,...] or a positive "
                         "--trigger-size/--num-triggers pair");
    }
    // Dynamic variant: rank once, then split the top size*k features into k
    // disjoint triggers. Each victim gets one of them; a triggered test input
    // carries all of them.
    pecan::TriggerSpec all = pecan::select_trigger_features(
        train, a.trigger_size * a.num_triggers, a.target_label, a.seed);
    for (std::uint32_t t = 0; t < a.num_triggers; ++t) {
      pecan::TriggerSpec part;
      for (std::uint32_t j = 0; j < a.trigger_size; ++j) {
        part.assignments.push_back(all.assignments[t * a.trigger_size + j]);
      }
      plan.triggers.push_back(std::move(part));
    }
  }

  auto [poisoned, victims] = pecan::poison_dataset(train, plan);

  namespace fs = std::filesystem;
  fs::create_directories(a.out_dir);
  pecan::save_csv(poisoned, fs::path(a.out_dir) / "poisoned_train.csv");
  pecan::save_poison_plan(plan, fs::path(a.out_dir) / "plan.json");
  {
    nlohmann::json j;
    j["poisoned_indices"] = victims;
    std::FILE* f =
        std::fopen((fs::path(a.out_dir) / "victims.json").string().c_str(),
                   "wb");
    if (!f) throw pecan::io_error("cannot write victims.json");
    std::string text = j.dump(2);
    text.push_back('\n');
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
  }

  bool have_test = !a.test_data.csv.empty() ||
                   !a.test_data.idx_images.empty() ||
                   a.test_data.synth_per_class != 0;
  if (have_test) {
    pecan::Dataset test = load_data(a.test_data);
    for (auto& e : test.examples) {
      for (const auto& t : plan.triggers) {
        e.features = pecan::apply_trigger(e.features, t);
      }
    }
    pecan::save_csv(test, fs::path(a.out_dir) / "triggered_test.csv");
  }

  std::printf("poisoned %zu of %zu rows (%zu trigger%s) -> %s\n",
              victims.size(), train.size(), plan.triggers.size(),
              plan.triggers.size() == 1 ? "" : "s", a.out_dir.c_str());
  return 0;
}

struct AuditArgs {
  DataOpts train_data;
  DataOpts test_data;
  TrainOpts train;
  RegionOpts region;
  std::uint64_t n = 20;
  std::uint64_t trials = 100;
  std::uint64_t over_budget_trials = 0;
  std::uint64_t seed = 0;
  bool bidirectional = true;
  bool use_crown = false;
  std::string out;
  unsigned jobs = 0;
};

int cmd_audit(const AuditArgs& a) {
  pecan::Dataset train = load_data(a.train_data);
  pecan::Dataset test = load_data(a.test_data);

  pecan::AuditOptions opt;
  opt.n = a.n;
  opt.cfg = make_train_config(a.train);
  opt.region = make_region(a.region);
  opt.trials = a.trials;
  opt.over_budget_trials = a.over_budget_trials;
  opt.seed = a.seed;
  opt.bidirectional = a.bidirectional;
  opt.use_crown = a.use_crown;
  opt.jobs = a.jobs;

  pecan::AuditReport rep = pecan::audit_soundness(train, test, opt);
  if (!a.out.empty()) pecan::save_audit_report(rep, a.out);

  std::printf("audit: %llu trials, %llu violations; bidirectional %llu "
              "checked, %llu violations; %llu over-budget trials, %llu "
              "flips\n",
              static_cast<unsigned long long>(rep.trials),
              static_cast<unsigned long long>(rep.violations),
              static_cast<unsigned long long>(rep.bidir_checked),
              static_cast<unsigned long long>(rep.bidir_violations),
              static_cast<unsigned long long>(rep.over_budget_trials),
              static_cast<unsigned long long>(rep.over_budget_flips));
  return (rep.violations > 0 || rep.bidir_violations > 0) ? 1 : 0;
}

void add_jobs_opt(CLI::App* cmd, unsigned& jobs) {
  cmd->add_option("--jobs", jobs,
                  "worker threads (default: $PECAN_JOBS, else all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pecan: partition-and-certify ensemble defense against "
               "poisoning and evasion"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "key=value config file; command-line flags override it");
  app.set_version_flag("--version", "pecan 0.1.0");

  PartitionArgs pa;
  CLI::App* partition = app.add_subcommand(
      "partition", "hash-partition a dataset and write the assignment plan");
  add_data_opts(partition, pa.data, "", "dataset");
  partition->add_option("--n", pa.n, "number of partitions")->required();
  partition->add_option("--out", pa.out, "partition plan JSON path");

  TrainArgs ta;
  CLI::App* train = app.add_subcommand(
      "train", "partition a dataset and train one model per part");
  add_data_opts(train, ta.data, "", "training set");
  add_train_opts(train, ta.train);
  train->add_option("--n", ta.n, "number of partitions / models")->required();
  train->add_option("--mode", ta.mode,
                    "pecan | dpa | evasion-only (forces n = 1)")
      ->check(CLI::IsMember({"pecan", "dpa", "evasion-only"}));
  train->add_option("--out", ta.out, "ensemble output directory")->required();
  add_jobs_opt(train, ta.jobs);

  CertifyArgs ca;
  CLI::App* certify = app.add_subcommand(
      "certify", "run the ensemble over a test set and write result rows");
  certify->add_option("--ensemble", ca.ensemble_dir,
                      "ensemble directory written by train")
      ->required();
  add_data_opts(certify, ca.data, "", "test set");
  add_region_opts(certify, ca.region);
  certify->add_option("--mode", ca.mode, "pecan | dpa | evasion-only")
      ->check(CLI::IsMember({"pecan", "dpa", "evasion-only"}));
  certify->add_flag("--use-crown", ca.use_crown,
                    "tighten bounds with the backward relaxation");
  certify->add_option("--out", ca.out, "results CSV path")->required();
  add_jobs_opt(certify, ca.jobs);

  EvaluateArgs ea;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "turn a results CSV into a certified-accuracy curve");
  evaluate->add_option("--results", ea.results, "results CSV from certify")
      ->required();
  evaluate->add_option("--train-size", ea.train_size,
                       "training-set size the ensemble was built from")
      ->required();
  evaluate->add_option("--r-grid", ea.r_grid,
                       "comma-separated R percentages to evaluate");
  evaluate->add_option("--out", ea.out, "curve CSV path");
  evaluate->add_flag("--self-check", ea.self_check,
                     "assert the metric partition and monotonicity "
                     "invariants");

  AttackArgs aa;
  CLI::App* attack = app.add_subcommand(
      "attack", "plant a clean-label backdoor and trigger a test set");
  add_data_opts(attack, aa.train_data, "", "training set");
  add_data_opts(attack, aa.test_data, "test-", "test set");
  attack->add_option("--poison-fraction", aa.poison_fraction,
                     "fraction of the training set to poison")
      ->required();
  attack->add_option("--target-label", aa.target_label,
                     "class the backdoor should elicit")
      ->required();
  attack->add_flag("--flip-labels", aa.flip_labels,
                   "dirty-label variant: poison other classes and relabel");
  attack->add_option("--trigger", aa.explicit_triggers,
                     "explicit trigger 'idx=val[,idx=val...]' (repeatable)");
  attack->add_option("--trigger-size", aa.trigger_size,
                     "features per selected trigger");
  attack->add_option("--num-triggers", aa.num_triggers,
                     "disjoint triggers to select (dynamic backdoor)");
  attack->add_option("--seed", aa.seed, "attack seed");
  attack->add_option("--out-dir", aa.out_dir,
                     "directory for poisoned_train.csv, plan.json, "
                     "victims.json, triggered_test.csv")
      ->required();

  AuditArgs da;
  CLI::App* audit = app.add_subcommand(
      "audit", "empirically test the certified radius by retraining inside "
               "the budget");
  add_data_opts(audit, da.train_data, "", "training set");
  add_data_opts(audit, da.test_data, "test-", "test set");
  add_train_opts(audit, da.train);
  add_region_opts(audit, da.region);
  audit->add_option("--n", da.n, "number of partitions / models");
  audit->add_option("--trials", da.trials, "within-budget attack trials");
  audit->add_option("--over-budget-trials", da.over_budget_trials,
                    "extra informational trials beyond the certified budget");
  audit->add_option("--audit-seed", da.seed, "audit RNG seed");
  audit->add_flag("--bidirectional,!--no-bidirectional", da.bidirectional,
                  "also check the poisoned-side certificate");
  audit->add_flag("--use-crown", da.use_crown,
                  "tighten bounds with the backward relaxation");
  audit->add_option("--out", da.out, "audit report JSON path");
  add_jobs_opt(audit, da.jobs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (partition->parsed()) return cmd_partition(pa);
    if (train->parsed()) return cmd_train(ta);
    if (certify->parsed()) return cmd_certify(ca);
    if (evaluate->parsed()) return cmd_evaluate(ea);
    if (attack->parsed()) return cmd_attack(aa);
    if (audit->parsed()) return cmd_audit(da);
  } catch (const pecan::audit_violation& e) {
    std::fprintf(stderr, "pecan: %s\n", e.what());
    return 1;
  } catch (const pecan::config_error& e) {
    std::fprintf(stderr, "pecan: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "pecan: %s\n", e.what());
    return 2;
  } catch (const std::out_of_range& e) {
    std::fprintf(stderr, "pecan: %s\n", e.what());
    return 2;
  } catch (const pecan::io_error& e) {
    std::fprintf(stderr, "pecan: %s\n", e.what());
    return 3;
  } catch (const pecan::format_error& e) {
    std::fprintf(stderr, "pecan: %s\n", e.what());
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "pecan: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "pecan: internal error: %s\n", e.what());
    return 1;
  }
  return 0;
}

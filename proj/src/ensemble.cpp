#include "pecan/ensemble.hpp"

#include <openssl/evp.h>

#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string_view>

#include <json.hpp>

#include "pecan/errors.hpp"
#include "pecan/parallel.hpp"

namespace pecan {

VoteMode vote_mode_from_string(const std::string& s) {
  if (s == "pecan") return VoteMode::Pecan;
  if (s == "dpa") return VoteMode::Dpa;
  if (s == "evasion-only") return VoteMode::EvasionOnly;
  throw config_error("unknown mode '" + s +
                     "' (expected pecan, dpa, or evasion-only)");
}

std::string to_string(VoteMode mode) {
  switch (mode) {
    case VoteMode::Pecan: return "pecan";
    case VoteMode::Dpa: return "dpa";
    default: return "evasion-only";
  }
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

namespace {

nlohmann::json config_to_json(const TrainConfig& cfg) {
  // Floats are serialized via their exact bit patterns alongside readable
  // values so the digest never depends on decimal formatting.
  return nlohmann::json{
      {"layer_dims", cfg.layer_dims},
      {"seed", cfg.seed},
      {"epochs_warmup", cfg.epochs_warmup},
      {"epochs_mixed", cfg.epochs_mixed},
      {"epochs_full", cfg.epochs_full},
      {"batch_size", cfg.batch_size},
      {"learning_rate_bits", std::bit_cast<std::uint32_t>(cfg.learning_rate)},
      {"momentum_bits", std::bit_cast<std::uint32_t>(cfg.momentum)},
      {"region_kind", to_string(cfg.region_kind)},
      {"eps_train_bits", std::bit_cast<std::uint64_t>(cfg.eps_train)},
      {"s_train", cfg.s_train},
      {"kappa_start_bits", std::bit_cast<std::uint64_t>(cfg.kappa_start)},
      {"kappa_end_bits", std::bit_cast<std::uint64_t>(cfg.kappa_end)},
  };
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.layer_dims = j.at("layer_dims").get<std::vector<std::uint32_t>>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.epochs_warmup = j.at("epochs_warmup").get<std::uint32_t>();
  cfg.epochs_mixed = j.at("epochs_mixed").get<std::uint32_t>();
  cfg.epochs_full = j.at("epochs_full").get<std::uint32_t>();
  cfg.batch_size = j.at("batch_size").get<std::uint32_t>();
  cfg.learning_rate =
      std::bit_cast<float>(j.at("learning_rate_bits").get<std::uint32_t>());
  cfg.momentum =
      std::bit_cast<float>(j.at("momentum_bits").get<std::uint32_t>());
  cfg.region_kind =
      region_kind_from_string(j.at("region_kind").get<std::string>());
  cfg.eps_train =
      std::bit_cast<double>(j.at("eps_train_bits").get<std::uint64_t>());
  cfg.s_train = j.at("s_train").get<std::uint32_t>();
  cfg.kappa_start =
      std::bit_cast<double>(j.at("kappa_start_bits").get<std::uint64_t>());
  cfg.kappa_end =
      std::bit_cast<double>(j.at("kappa_end_bits").get<std::uint64_t>());
  return cfg;
}

std::string model_file_name(std::uint64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "model_%05llu.pecn",
                static_cast<unsigned long long>(i));
  return buf;
}

}  // namespace

std::string config_json(const TrainConfig& cfg, std::uint64_t n) {
  nlohmann::json j = config_to_json(cfg);
  j["n"] = n;
  // nlohmann::json objects iterate in sorted key order, so dump() is
  // canonical for a given field set.
  return j.dump();
}

std::string config_digest(const TrainConfig& cfg, std::uint64_t n) {
  return sha256_hex(config_json(cfg, n));
}

Ensemble train_ensemble(const Dataset& d, const TrainConfig& cfg,
                        std::uint64_t n, unsigned jobs) {
  if (n == 0) throw std::invalid_argument("train_ensemble: n must be >= 1");
  cfg.validate(d.feature_dim, d.num_classes);
  const std::vector<Dataset> parts = partition(d, n);
  Ensemble ens;
  ens.n = n;
  ens.global_seed = cfg.seed;
  ens.config = cfg;
  ens.config_digest = config_digest(cfg, n);
  ens.models.resize(n);
  parallel_for(n, resolve_jobs(jobs), [&](std::size_t i) {
    ens.models[i] = train(parts[i], cfg, /*model_seed=*/i);
  });
  return ens;
}

void save_ensemble(const Ensemble& ens, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io_error("cannot create directory " + dir.string());
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["n"] = ens.n;
  manifest["global_seed"] = ens.global_seed;
  manifest["config"] = config_to_json(ens.config);
  manifest["config_digest"] = ens.config_digest;
  std::vector<std::string> names;
  std::vector<bool> sentinel;
  for (std::uint64_t i = 0; i < ens.n; ++i) {
    names.push_back(model_file_name(i));
    sentinel.push_back(ens.models[i].sentinel);
    save_model(ens.models[i], dir / names.back());
  }
  manifest["models"] = names;
  manifest["sentinel"] = sentinel;
  // drop stale models from an earlier, larger run; runs write contiguous
  // indices, so anything past n-1 is dead weight the manifest no longer names
  for (std::uint64_t i = ens.n;; ++i) {
    std::filesystem::path stale = dir / model_file_name(i);
    if (!std::filesystem::remove(stale, ec) || ec) break;
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw io_error("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
  if (!out) throw io_error("write failed on manifest in " + dir.string());
}

Ensemble load_ensemble(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw io_error("cannot open " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& ex) {
    throw format_error((dir / "manifest.json").string() + ": " + ex.what());
  }
  Ensemble ens;
  try {
    if (manifest.at("format_version").get<int>() != 1)
      throw format_error("unsupported manifest format_version");
    ens.n = manifest.at("n").get<std::uint64_t>();
    ens.global_seed = manifest.at("global_seed").get<std::uint64_t>();
    ens.config = config_from_json(manifest.at("config"));
    ens.config_digest = manifest.at("config_digest").get<std::string>();
    const auto names = manifest.at("models").get<std::vector<std::string>>();
    const auto sentinel = manifest.at("sentinel").get<std::vector<bool>>();
    if (names.size() != ens.n || sentinel.size() != ens.n)
      throw format_error("manifest model list length != n");
    ens.models.reserve(ens.n);
    for (std::uint64_t i = 0; i < ens.n; ++i) {
      MlpModel m = load_model(dir / names[i]);
      if (m.sentinel != sentinel[i])
        throw format_error("manifest sentinel flag disagrees with " +
                           names[i]);
      ens.models.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw format_error((dir / "manifest.json").string() + ": " + ex.what());
  }
  return ens;
}

std::vector<Vote> collect_votes(const Ensemble& ens, std::span<const float> x,
                                const RegionSpec& spec, bool use_crown,
                                VoteMode mode) {
  std::vector<Vote> votes;
  votes.reserve(ens.models.size());
  for (const MlpModel& m : ens.models) {
    Vote v;
    if (mode == VoteMode::Dpa) {
      // DPA ignores Step 2: every model votes and counts as certified.
      // The empty-partition constant model votes class 0 like any other.
      v.label = predict(m, x);
      v.verdict = Verdict::Cert;
      v.sentinel = false;
    } else {
      if (m.sentinel) {
        v.sentinel = true;
        v.verdict = Verdict::Abstain;
      } else {
        const CertifiedPrediction p = certify_example(m, x, spec, use_crown);
        v.label = p.label;
        v.verdict = p.verdict;
      }
    }
    votes.push_back(v);
  }
  return votes;
}

std::vector<CertRow> certify_dataset(const Ensemble& ens, const Dataset& test,
                                     const RegionSpec& spec, bool use_crown,
                                     VoteMode mode, unsigned jobs) {
  if (!test.empty() && test.feature_dim != ens.models.front().input_dim())
    throw std::invalid_argument(
        "certify_dataset: testset dim does not match models");
  spec.validate(test.feature_dim);
  const std::uint32_t num_classes = ens.models.front().output_dim();
  std::vector<CertRow> rows(test.size());
  parallel_for(test.size(), resolve_jobs(jobs), [&](std::size_t i) {
    const Example& e = test.examples[i];
    const std::vector<Vote> votes =
        collect_votes(ens, e.features, spec, use_crown, mode);
    const AggregateResult agg = aggregate(votes, num_classes);
    CertRow& r = rows[i];
    r.row.example_id = i;
    r.row.true_label = e.label;
    r.row.y_star = agg.y_star;
    r.row.radius = agg.radius;
    r.y_prime = agg.y_prime;
    r.n1 = agg.n1;
    r.n2 = agg.n2;
    r.n3 = agg.n3;
  });
  return rows;
}

void save_results_csv(const std::vector<CertRow>& rows, VoteMode mode,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << "# mode=" << to_string(mode) << '\n';
  out << "example_id,true_label,y_star,y_prime,n1,n2,n3,radius\n";
  for (const auto& r : rows) {
    out << r.row.example_id << ',' << r.row.true_label << ',' << r.row.y_star
        << ',' << r.y_prime << ',' << r.n1 << ',' << r.n2 << ',' << r.n3
        << ',';
    if (r.row.radius) {
      out << *r.row.radius;
    } else {
      out << "diamond";  // no certificate at any radius
    }
    out << '\n';
  }
  out.flush();
  if (!out) throw io_error("write failed on " + path.string());
}

ResultsFile load_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  ResultsFile rf;
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# mode=", 0) == 0) {
      rf.mode = vote_mode_from_string(line.substr(7));
      continue;
    }
    if (!saw_header) {
      if (line.rfind("example_id,", 0) != 0)
        throw format_error(path.string() + ":" + std::to_string(lineno) +
                           ": missing results header");
      saw_header = true;
      continue;
    }
    std::vector<std::string_view> fields;
    std::string_view sv(line);
    for (std::size_t pos = 0;;) {
      const std::size_t comma = sv.find(',', pos);
      if (comma == std::string_view::npos) {
        fields.push_back(sv.substr(pos));
        break;
      }
      fields.push_back(sv.substr(pos, comma - pos));
      pos = comma + 1;
    }
    if (fields.size() != 8)
      throw format_error(path.string() + ":" + std::to_string(lineno) +
                         ": expected 8 fields, got " +
                         std::to_string(fields.size()));
    CertRow r;
    auto parse = [&](std::string_view f, auto& v) {
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size())
        throw format_error(path.string() + ":" + std::to_string(lineno) +
                           ": bad numeric field '" + std::string(f) + "'");
    };
    parse(fields[0], r.row.example_id);
    parse(fields[1], r.row.true_label);
    parse(fields[2], r.row.y_star);
    parse(fields[3], r.y_prime);
    parse(fields[4], r.n1);
    parse(fields[5], r.n2);
    parse(fields[6], r.n3);
    if (fields[7] != "diamond") {
      std::int64_t radius = 0;
      parse(fields[7], radius);
      r.row.radius = radius;
    }
    rf.rows.push_back(r);
  }
  if (!saw_header)
    throw format_error(path.string() + ": missing results header");
  return rf;
}

}  // namespace pecan

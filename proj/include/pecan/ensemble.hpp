#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pecan/aggregate.hpp"
#include "pecan/metrics.hpp"
#include "pecan/partition.hpp"
#include "pecan/train.hpp"

namespace pecan {

enum class VoteMode { Pecan, Dpa, EvasionOnly };

VoteMode vote_mode_from_string(const std::string& s);
std::string to_string(VoteMode mode);

struct Ensemble {
  std::vector<MlpModel> models;
  std::uint64_t n = 0;
  std::uint64_t global_seed = 0;
  std::string config_digest;  // sha256 over the canonical config JSON
  TrainConfig config;
};

// Canonical JSON of (n, cfg) and its SHA-256 hex digest; the digest is what
// manifests carry and what the determinism acceptance check compares.
std::string config_json(const TrainConfig& cfg, std::uint64_t n);
std::string config_digest(const TrainConfig& cfg, std::uint64_t n);
std::string sha256_hex(const std::string& bytes);

// Step 1: partition d into n parts and train one model per part, up to
// `jobs` concurrently. Model i uses model_seed = i; empty partitions get
// sentinels. Output is independent of jobs.
Ensemble train_ensemble(const Dataset& d, const TrainConfig& cfg,
                        std::uint64_t n, unsigned jobs);

// Model store: dir/manifest.json + dir/model_00000.pecn ... Manifest carries
// {format_version, n, global_seed, config, config_digest, models, sentinel}.
void save_ensemble(const Ensemble& ens, const std::filesystem::path& dir);
Ensemble load_ensemble(const std::filesystem::path& dir);

// Steps 2+3 for one input: per-model votes under the given mode.
// Pecan/EvasionOnly run certify_example; Dpa forces every vote to cert
// (sentinels vote class 0 like the constant models they are).
std::vector<Vote> collect_votes(const Ensemble& ens, std::span<const float> x,
                                const RegionSpec& spec, bool use_crown,
                                VoteMode mode);

// Full certification row: ResultRow plus the vote-count diagnostics.
struct CertRow {
  ResultRow row;
  std::uint32_t y_prime = 0;
  std::uint64_t n1 = 0;
  std::uint64_t n2 = 0;
  std::uint64_t n3 = 0;
};

std::vector<CertRow> certify_dataset(const Ensemble& ens, const Dataset& test,
                                     const RegionSpec& spec, bool use_crown,
                                     VoteMode mode, unsigned jobs);

// Results CSV: header line, then
// example_id,true_label,y_star,y_prime,n1,n2,n3,radius  (radius is an
// integer, or the literal "diamond" for rows without a certificate).
void save_results_csv(const std::vector<CertRow>& rows, VoteMode mode,
                      const std::filesystem::path& path);
struct ResultsFile {
  std::vector<CertRow> rows;
  VoteMode mode = VoteMode::Pecan;
};
ResultsFile load_results_csv(const std::filesystem::path& path);

inline std::vector<ResultRow> to_result_rows(const std::vector<CertRow>& rows) {
  std::vector<ResultRow> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.row);
  return out;
}

}  // namespace pecan

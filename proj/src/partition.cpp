#include "pecan/partition.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "pecan/errors.hpp"

namespace pecan {

std::uint64_t assign(const Example& e, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("assign: n must be >= 1");
  const std::string bytes = canonical_bytes(e);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &digest_len,
                 EVP_sha256(), nullptr) != 1 ||
      digest_len < 8) {
    throw std::runtime_error("assign: SHA-256 digest failed");
  }
  std::uint64_t h = 0;
  for (int i = 0; i < 8; ++i) h = (h << 8) | digest[i];
  return h % n;
}

std::vector<Dataset> partition(const Dataset& d, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("partition: n must be >= 1");
  std::vector<Dataset> parts(n);
  for (auto& p : parts) {
    p.feature_dim = d.feature_dim;
    p.num_classes = d.num_classes;
  }
  for (const auto& e : d.examples)
    parts[assign(e, n)].examples.push_back(e);
  return parts;
}

PartitionPlan make_partition_plan(const Dataset& d, std::uint64_t n) {
  PartitionPlan plan;
  plan.n = n;
  plan.assignments.reserve(d.size());
  for (const auto& e : d.examples) plan.assignments.push_back(assign(e, n));
  return plan;
}

void save_partition_plan(const PartitionPlan& plan,
                         const std::filesystem::path& path) {
  nlohmann::json j;
  j["n"] = plan.n;
  j["assignments"] = plan.assignments;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw io_error("write failed on " + path.string());
}

PartitionPlan load_partition_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw format_error(path.string() + ": " + ex.what());
  }
  PartitionPlan plan;
  try {
    plan.n = j.at("n").get<std::uint64_t>();
    plan.assignments = j.at("assignments").get<std::vector<std::uint64_t>>();
  } catch (const nlohmann::json::exception& ex) {
    throw format_error(path.string() + ": " + ex.what());
  }
  for (std::uint64_t a : plan.assignments)
    if (a >= plan.n)
      throw format_error(path.string() + ": assignment out of range");
  return plan;
}

}  // namespace pecan

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pecan/data.hpp"

namespace pecan {

// Partition id of an example: SHA-256 over canonical_bytes(e), first 8 digest
// bytes read big-endian as a uint64, reduced mod n. Depends only on content,
// so duplicates land together and edits move at most their own partitions.
std::uint64_t assign(const Example& e, std::uint64_t n);

// Splits d into n partitions by assign(), preserving the relative order of
// examples inside each partition. Partitions may be empty.
std::vector<Dataset> partition(const Dataset& d, std::uint64_t n);

// Record of a partition run, serializable to JSON for inspection.
struct PartitionPlan {
  std::uint64_t n = 0;
  std::vector<std::uint64_t> assignments;  // one per example, in dataset order
};

PartitionPlan make_partition_plan(const Dataset& d, std::uint64_t n);
void save_partition_plan(const PartitionPlan& plan,
                         const std::filesystem::path& path);
PartitionPlan load_partition_plan(const std::filesystem::path& path);

}  // namespace pecan

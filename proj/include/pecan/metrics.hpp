#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace pecan {

// One certified test example as the evaluator sees it.
struct ResultRow {
  std::uint64_t example_id = 0;
  std::uint32_t true_label = 0;
  std::uint32_t y_star = 0;
  std::optional<std::int64_t> radius;  // nullopt = no certificate
};

struct MetricPoint {
  double R = 0.0;  // attack strength: modified examples as percent of |D|
  double certified_accuracy = 0.0;
  double normal_accuracy = 0.0;
  double asr = 0.0;
  double abstention_rate = 0.0;
};

// Whether a row's certificate covers modifying R percent of train_size
// examples. A modification costs 2 symmetric-difference units, hence the
// factor 2; the comparison is inclusive (>=), with a tiny epsilon so that
// thresholds that are exact in rational arithmetic are not lost to rounding.
bool qualifies(const std::optional<std::int64_t>& radius,
               std::uint64_t train_size, double R);

// Fraction of rows correct AND certified at strength R.
double certified_accuracy(const std::vector<ResultRow>& rows,
                          std::uint64_t train_size, double R);

// Fraction of rows correct, certificates ignored.
double normal_accuracy(const std::vector<ResultRow>& rows);

// Fraction of rows wrong AND certified at strength R.
double attack_success_rate(const std::vector<ResultRow>& rows,
                           std::uint64_t train_size, double R);

// Fraction of rows not certified at strength R. Together with the two
// metrics above this partitions the rows: the three always sum to 1.
double abstention_rate(const std::vector<ResultRow>& rows,
                       std::uint64_t train_size, double R);

std::vector<MetricPoint> metric_curve(const std::vector<ResultRow>& rows,
                                      std::uint64_t train_size,
                                      const std::vector<double>& R_values);

// Plot-ready CSV: R,certified_accuracy,normal_accuracy,asr,abstention_rate.
void save_metric_curve(const std::vector<MetricPoint>& curve,
                       const std::filesystem::path& path);

}  // namespace pecan

#include "pecan/metrics.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>

#include "pecan/errors.hpp"

namespace pecan {

namespace {

void require_rows(const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("metrics: empty row list");
}

}  // namespace

bool qualifies(const std::optional<std::int64_t>& radius,
               std::uint64_t train_size, double R) {
  if (!radius.has_value()) return false;
  if (R < 0.0) throw std::invalid_argument("metrics: R must be >= 0");
  // radius / train_size >= 2 * R / 100, evaluated as
  // radius >= 2 * (R/100) * train_size. The epsilon (1e-9) is far below the
  // 1/(100 * train_size) spacing of meaningful thresholds, so it only rescues
  // exact rational equalities from floating-point noise.
  const double threshold = 2.0 * (R / 100.0) * double(train_size);
  return double(*radius) + 1e-9 >= threshold;
}

double certified_accuracy(const std::vector<ResultRow>& rows,
                          std::uint64_t train_size, double R) {
  require_rows(rows);
  std::size_t hits = 0;
  for (const auto& row : rows)
    if (row.y_star == row.true_label && qualifies(row.radius, train_size, R))
      ++hits;
  return double(hits) / double(rows.size());
}

double normal_accuracy(const std::vector<ResultRow>& rows) {
  require_rows(rows);
  std::size_t hits = 0;
  for (const auto& row : rows)
    if (row.y_star == row.true_label) ++hits;
  return double(hits) / double(rows.size());
}

double attack_success_rate(const std::vector<ResultRow>& rows,
                           std::uint64_t train_size, double R) {
  require_rows(rows);
  std::size_t hits = 0;
  for (const auto& row : rows)
    if (row.y_star != row.true_label && qualifies(row.radius, train_size, R))
      ++hits;
  return double(hits) / double(rows.size());
}

double abstention_rate(const std::vector<ResultRow>& rows,
                       std::uint64_t train_size, double R) {
  require_rows(rows);
  std::size_t hits = 0;
  for (const auto& row : rows)
    if (!qualifies(row.radius, train_size, R)) ++hits;
  return double(hits) / double(rows.size());
}

std::vector<MetricPoint> metric_curve(const std::vector<ResultRow>& rows,
                                      std::uint64_t train_size,
                                      const std::vector<double>& R_values) {
  require_rows(rows);
  std::vector<MetricPoint> curve;
  curve.reserve(R_values.size());
  const double normal = normal_accuracy(rows);
  for (double R : R_values) {
    MetricPoint p;
    p.R = R;
    p.certified_accuracy = certified_accuracy(rows, train_size, R);
    p.normal_accuracy = normal;
    p.asr = attack_success_rate(rows, train_size, R);
    p.abstention_rate = abstention_rate(rows, train_size, R);
    curve.push_back(p);
  }
  return curve;
}

void save_metric_curve(const std::vector<MetricPoint>& curve,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << "R,certified_accuracy,normal_accuracy,asr,abstention_rate\n";
  char buf[64];
  auto put = [&](double v, char sep) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw io_error("float formatting failed");
    out.write(buf, ptr - buf);
    out.put(sep);
  };
  for (const auto& p : curve) {
    put(p.R, ',');
    put(p.certified_accuracy, ',');
    put(p.normal_accuracy, ',');
    put(p.asr, ',');
    put(p.abstention_rate, '\n');
  }
  out.flush();
  if (!out) throw io_error("write failed on " + path.string());
}

}  // namespace pecan

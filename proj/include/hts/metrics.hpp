#pragma once

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hts/hierarchy.hpp"
#include "hts/matrix.hpp"

namespace hts {

// WMAPE = Σ|ŷ − y| / Σ y over the given rows (all rows when subset is empty).
// A non-positive denominator is an explicit error, never clamped.
inline double wmape(const Matrix& yhat, const Matrix& y, const std::vector<int>& rows = {}) {
  check_same_shape(yhat, y, "wmape");
  double abs_err = 0.0, total = 0.0;
  auto accumulate_row = [&](int i) {
    for (int t = 0; t < y.cols; ++t) {
      abs_err += std::abs(yhat(i, t) - y(i, t));
      total += y(i, t);
    }
  };
  if (rows.empty())
    for (int i = 0; i < y.rows; ++i) accumulate_row(i);
  else
    for (int i : rows) accumulate_row(i);
  if (!(total > 0.0))
    throw std::runtime_error("wmape: ground-truth sum is not positive (" +
                             std::to_string(total) + ")");
  return abs_err / total;
}

inline std::vector<int> rows_of_level(const HierarchySpec& spec, int level) {
  std::vector<int> rows;
  for (int i = 0; i < spec.num_nodes(); ++i)
    if (spec.level.at(spec.node_ids[i]) == level) rows.push_back(i);
  return rows;
}

// Mean squared error over the entries of each hierarchy level (level 1 = top).
inline std::map<int, double> mse_per_level(const Matrix& yhat, const Matrix& y,
                                           const HierarchySpec& spec) {
  check_same_shape(yhat, y, "mse_per_level");
  if (y.rows != spec.num_nodes())
    throw std::invalid_argument("mse_per_level: row count does not match hierarchy");
  std::map<int, double> out;
  for (int level = 1; level <= spec.max_level(); ++level) {
    const auto rows = rows_of_level(spec, level);
    if (rows.empty())
      throw std::runtime_error("mse_per_level: empty level " + std::to_string(level));
    double s = 0.0;
    for (int i : rows)
      for (int t = 0; t < y.cols; ++t) {
        const double d = yhat(i, t) - y(i, t);
        s += d * d;
      }
    out[level] = s / (static_cast<double>(rows.size()) * y.cols);
  }
  return out;
}

inline std::map<int, double> wmape_per_level(const Matrix& yhat, const Matrix& y,
                                             const HierarchySpec& spec) {
  std::map<int, double> out;
  for (int level = 1; level <= spec.max_level(); ++level)
    out[level] = wmape(yhat, y, rows_of_level(spec, level));
  return out;
}

// Sample-based CRPS for one (series, timestep):
// (1/n)Σᵢ|xᵢ−y| − (1/(2n²))ΣᵢΣⱼ|xᵢ−xⱼ|. With n identical samples this
// degenerates to the absolute error.
inline double crps_empirical(const std::vector<double>& samples, double y) {
  const size_t n = samples.size();
  if (n == 0) throw std::invalid_argument("crps_empirical: empty sample set");
  double acc = 0.0;
  for (double x : samples) acc += std::abs(x - y);
  double pair = 0.0;
  for (double xi : samples)
    for (double xj : samples) pair += std::abs(xi - xj);
  return acc / n - pair / (2.0 * static_cast<double>(n) * static_cast<double>(n));
}

// Mean CRPS over series and timesteps. samples[t] is n×m (one sample per row);
// y is m×T.
inline double crps_empirical(const std::vector<Matrix>& samples, const Matrix& y) {
  if (samples.empty()) throw std::invalid_argument("crps_empirical: no timesteps");
  if (static_cast<int>(samples.size()) != y.cols)
    throw std::invalid_argument("crps_empirical: timestep count mismatch");
  double total = 0.0;
  for (int t = 0; t < y.cols; ++t) {
    const Matrix& s = samples[t];
    if (s.cols != y.rows) throw std::invalid_argument("crps_empirical: series mismatch");
    std::vector<double> col(s.rows);
    for (int i = 0; i < y.rows; ++i) {
      for (int r = 0; r < s.rows; ++r) col[r] = s(r, i);
      total += crps_empirical(col, y(i, t));
    }
  }
  return total / (static_cast<double>(y.rows) * y.cols);
}

// Mean coherency over samples (rows of an n×m matrix).
inline double coherency_of_samples(const Matrix& samples, const AggregationMatrix& agg) {
  if (samples.cols != agg.num_nodes())
    throw std::invalid_argument("coherency_of_samples: dimension mismatch");
  double total = 0.0;
  for (int r = 0; r < samples.rows; ++r) {
    Matrix y(samples.cols, 1);
    for (int i = 0; i < samples.cols; ++i) y(i, 0) = samples(r, i);
    total += coherency(y, agg);
  }
  return total / samples.rows;
}

struct MetricsReport {
  std::map<int, double> per_level_mse;    // level 1 = top
  std::map<int, double> per_level_wmape;
  double average_mse = 0.0;  // entry-weighted over all series
  double overall_wmape = 0.0;
  double mean_coherency = 0.0;  // mean per-timestep c(ŷ)
  bool has_crps = false;
  double crps = 0.0;
  double mean_sample_coherency = 0.0;  // only meaningful when has_crps
  int n_series = 0;
  int n_timesteps = 0;
  int n_samples = 0;
  std::map<int, int> series_per_level;
  std::string config_hash;
};

// Point-forecast metrics for an m×T prediction panel.
inline MetricsReport evaluate_point(const Matrix& yhat, const Matrix& y,
                                    const HierarchySpec& spec, const AggregationMatrix& agg) {
  MetricsReport r;
  r.per_level_mse = mse_per_level(yhat, y, spec);
  r.per_level_wmape = wmape_per_level(yhat, y, spec);
  double s = 0.0;
  for (int i = 0; i < y.size(); ++i) {
    const double d = yhat.a[i] - y.a[i];
    s += d * d;
  }
  r.average_mse = s / y.size();
  r.overall_wmape = wmape(yhat, y);
  r.mean_coherency = coherency_panel(yhat, agg);
  r.n_series = y.rows;
  r.n_timesteps = y.cols;
  for (int level = 1; level <= spec.max_level(); ++level)
    r.series_per_level[level] = static_cast<int>(rows_of_level(spec, level).size());
  return r;
}

inline nlohmann::ordered_json to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  auto level_map = [](const std::map<int, double>& m) {
    nlohmann::ordered_json out;
    for (const auto& [level, v] : m) out["level_" + std::to_string(level)] = v;
    return out;
  };
  j["per_level_mse"] = level_map(r.per_level_mse);
  j["per_level_wmape"] = level_map(r.per_level_wmape);
  j["average_mse"] = r.average_mse;
  j["overall_wmape"] = r.overall_wmape;
  j["mean_coherency"] = r.mean_coherency;
  if (r.has_crps) {
    j["crps"] = r.crps;
    j["mean_sample_coherency"] = r.mean_sample_coherency;
  }
  nlohmann::ordered_json counts;
  counts["n_series"] = r.n_series;
  counts["n_timesteps"] = r.n_timesteps;
  counts["n_samples"] = r.n_samples;
  for (const auto& [level, n] : r.series_per_level)
    counts["series_level_" + std::to_string(level)] = n;
  j["counts"] = counts;
  j["config_hash"] = r.config_hash;
  // Conventions are fixed in code; recorded so reports are self-describing.
  j["conventions"] = {
      {"coherency", "mean per-timestep euclidean norm of (yhat - A yhat)"},
      {"average_mse", "entry-weighted over all series and timesteps"},
      {"crps", "sample energy form: mean|x-y| - mean|x-x'|/2"},
      {"level_numbering", "1 = top aggregate"}};
  return j;
}

inline std::string csv_header(const MetricsReport& r) {
  std::ostringstream out;
  out << "average_mse,overall_wmape,mean_coherency,crps,mean_sample_coherency";
  for (const auto& [level, v] : r.per_level_mse) out << ",mse_level_" << level;
  for (const auto& [level, v] : r.per_level_wmape) out << ",wmape_level_" << level;
  return out.str();
}

inline std::string csv_row(const MetricsReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << r.average_mse << "," << r.overall_wmape << "," << r.mean_coherency << ",";
  if (r.has_crps)
    out << r.crps << "," << r.mean_sample_coherency;
  else
    out << ",";
  for (const auto& [level, v] : r.per_level_mse) out << "," << v;
  for (const auto& [level, v] : r.per_level_wmape) out << "," << v;
  return out.str();
}

}  // namespace hts

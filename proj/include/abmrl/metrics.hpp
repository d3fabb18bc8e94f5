#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "abmrl/rng.hpp"

namespace abmrl {

// Long-format metric rows: (run id, step, metric name, value).
struct MetricRow {
  std::string run_id;
  long step = 0;
  std::string metric;
  double value = 0.0;
};

struct MetricsTable {
  std::vector<MetricRow> rows;

  void add(std::string run_id, long step, std::string metric, double value);
  void append(const MetricsTable& other);
  std::vector<double> values(const std::string& metric) const;  // in row order
  std::string csv() const;
  void write_csv(const std::string& path) const;
  static MetricsTable read_csv(const std::string& path);
};

// Trailing mean over `window` entries; positions without a full window are
// omitted, so the output has size() - window + 1 entries.
std::vector<double> rolling_mean(std::span<const double> series, int window);

// Pearson correlation; either series being constant yields 0 by convention.
double pearson(std::span<const double> x, std::span<const double> y);

// Mean pairwise correlation matrix of per-agent binary action series,
// averaged over independent observation windows. traces[w][agent] is the
// action series of one agent in window w. Row-major n x n, unit diagonal.
std::vector<double> mean_correlation_matrix(
    const std::vector<std::vector<std::vector<int>>>& traces);

double max_offdiag_abs(std::span<const double> matrix, int n);

// 95th percentile of max |off-diagonal| correlation under independence,
// estimated by Monte Carlo with the given per-agent frequencies and window
// shape (n_windows x window_len).
double independent_null_band(std::span<const double> frequencies, int n_windows, int window_len,
                             int replicates, RngStream& rng);

struct MeanCi {
  double mean = 0.0;
  double half_width = 0.0;  // 1.96 * sd / sqrt(n)
  double lo() const { return mean - half_width; }
  double hi() const { return mean + half_width; }
};
MeanCi mean_ci(std::span<const double> values);

}  // namespace abmrl

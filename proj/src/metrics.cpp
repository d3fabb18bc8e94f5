#include "abmrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "abmrl/errors.hpp"

namespace abmrl {

void MetricsTable::add(std::string run_id, long step, std::string metric, double value) {
  rows.push_back({std::move(run_id), step, std::move(metric), value});
}

void MetricsTable::append(const MetricsTable& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

std::vector<double> MetricsTable::values(const std::string& metric) const {
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.metric == metric) out.push_back(r.value);
  return out;
}

std::string MetricsTable::csv() const {
  std::ostringstream out;
  out << "run_id,step,metric,value\n";
  char buf[64];
  for (const auto& r : rows) {
    // shortest round-trip double formatting keeps re-runs byte-identical
    int prec = 1;
    for (; prec <= 17; ++prec) {
      snprintf(buf, sizeof(buf), "%.*g", prec, r.value);
      if (strtod(buf, nullptr) == r.value) break;
    }
    out << r.run_id << "," << r.step << "," << r.metric << "," << buf << "\n";
  }
  return out.str();
}

void MetricsTable::write_csv(const std::string& path) const {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("MetricsTable::write_csv: cannot open '" + path + "'");
  out << csv();
}

MetricsTable MetricsTable::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("MetricsTable::read_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "run_id,step,metric,value")
    throw ConfigError("MetricsTable::read_csv: bad header in '" + path + "'");
  MetricsTable table;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    MetricRow r;
    std::string step, value;
    if (!std::getline(row, r.run_id, ',') || !std::getline(row, step, ',') ||
        !std::getline(row, r.metric, ',') || !std::getline(row, value))
      throw ConfigError("MetricsTable::read_csv: " + path + ":" + std::to_string(line_no) +
                        ": expected four fields");
    r.step = std::stol(step);
    r.value = std::stod(value);
    table.rows.push_back(std::move(r));
  }
  return table;
}

std::vector<double> rolling_mean(std::span<const double> series, int window) {
  require(window >= 1, "rolling_mean: window must be >= 1");
  std::vector<double> out;
  if (static_cast<int>(series.size()) < window) return out;
  double acc = 0.0;
  for (int i = 0; i < window; ++i) acc += series[static_cast<size_t>(i)];
  out.push_back(acc / window);
  for (size_t i = static_cast<size_t>(window); i < series.size(); ++i) {
    acc += series[i] - series[i - static_cast<size_t>(window)];
    out.push_back(acc / window);
  }
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && !x.empty(), "pearson: need equal non-empty series");
  size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;  // constant series carry no signal
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> mean_correlation_matrix(
    const std::vector<std::vector<std::vector<int>>>& traces) {
  require(!traces.empty(), "mean_correlation_matrix: need at least one window");
  size_t n = traces[0].size();
  require(n >= 1, "mean_correlation_matrix: need at least one agent");
  for (const auto& w : traces)
    require(w.size() == n, "mean_correlation_matrix: agent count differs across windows");

  std::vector<double> acc(n * n, 0.0);
  std::vector<double> xi, xj;
  for (const auto& window : traces) {
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = i + 1; j < n; ++j) {
        xi.assign(window[i].begin(), window[i].end());
        xj.assign(window[j].begin(), window[j].end());
        double r = pearson(xi, xj);
        acc[i * n + j] += r;
        acc[j * n + i] += r;
      }
    }
  }
  double k = static_cast<double>(traces.size());
  for (double& v : acc) v /= k;
  for (size_t i = 0; i < n; ++i) acc[i * n + i] = 1.0;
  return acc;
}

double max_offdiag_abs(std::span<const double> matrix, int n) {
  require(static_cast<size_t>(n) * n == matrix.size(), "max_offdiag_abs: shape mismatch");
  double m = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) m = std::max(m, std::fabs(matrix[static_cast<size_t>(i) * n + j]));
  return m;
}

double independent_null_band(std::span<const double> frequencies, int n_windows, int window_len,
                             int replicates, RngStream& rng) {
  require(n_windows >= 1 && window_len >= 2, "independent_null_band: bad window shape");
  require(replicates >= 20, "independent_null_band: need enough replicates");
  size_t n = frequencies.size();
  std::vector<double> maxima;
  maxima.reserve(static_cast<size_t>(replicates));
  std::vector<std::vector<std::vector<int>>> traces(
      static_cast<size_t>(n_windows),
      std::vector<std::vector<int>>(n, std::vector<int>(static_cast<size_t>(window_len), 0)));
  for (int rep = 0; rep < replicates; ++rep) {
    for (auto& window : traces)
      for (size_t i = 0; i < n; ++i)
        for (int t = 0; t < window_len; ++t)
          window[i][static_cast<size_t>(t)] = rng.bernoulli(frequencies[i]) ? 1 : 0;
    auto m = mean_correlation_matrix(traces);
    maxima.push_back(max_offdiag_abs(m, static_cast<int>(n)));
  }
  std::sort(maxima.begin(), maxima.end());
  size_t idx = static_cast<size_t>(std::ceil(0.95 * replicates)) - 1;
  return maxima[std::min(idx, maxima.size() - 1)];
}

MeanCi mean_ci(std::span<const double> values) {
  require(!values.empty(), "mean_ci: empty sample");
  double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var = values.size() > 1 ? var / (n - 1.0) : 0.0;
  return {mean, 1.96 * std::sqrt(var / n)};
}

}  // namespace abmrl

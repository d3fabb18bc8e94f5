#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "abmrl/errors.hpp"
#include "abmrl/metrics.hpp"

using namespace abmrl;

TEST_CASE("rolling mean") {
  std::vector<double> series{1, 2, 3, 4};
  SUBCASE("window one is the identity") {
    CHECK(rolling_mean(series, 1) == series);
  }
  SUBCASE("constant series stays put") {
    std::vector<double> flat(10, 0.3);
    auto out = rolling_mean(flat, 4);
    REQUIRE(out.size() == 7);
    for (double v : out) CHECK(v == doctest::Approx(0.3).epsilon(1e-12));
  }
  SUBCASE("window two on 1..4") {
    auto out = rolling_mean(series, 2);
    REQUIRE(out.size() == 3);
    CHECK(out[0] == doctest::Approx(1.5));
    CHECK(out[1] == doctest::Approx(2.5));
    CHECK(out[2] == doctest::Approx(3.5));
  }
  SUBCASE("window longer than the series yields nothing") {
    CHECK(rolling_mean(series, 9).empty());
  }
}

TEST_CASE("pearson correlation conventions") {
  std::vector<double> a{1, 0, 1, 1, 0, 0, 1, 0};
  std::vector<double> b{0, 1, 0, 0, 1, 1, 0, 1};
  CHECK(pearson(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson(a, b) == doctest::Approx(-1.0).epsilon(1e-12));
  std::vector<double> flat(8, 1.0);
  CHECK(pearson(a, flat) == 0.0);  // constant series carry no signal
}

TEST_CASE("mean correlation matrix is symmetric with unit diagonal") {
  RngStream rng(1, "traces");
  std::vector<std::vector<std::vector<int>>> traces(
      4, std::vector<std::vector<int>>(5, std::vector<int>(60, 0)));
  for (auto& window : traces)
    for (auto& series : window)
      for (auto& v : series) v = rng.bernoulli(0.5) ? 1 : 0;
  auto m = mean_correlation_matrix(traces);
  for (int i = 0; i < 5; ++i) {
    CHECK(m[static_cast<size_t>(i) * 5 + i] == 1.0);
    for (int j = 0; j < 5; ++j)
      CHECK(m[static_cast<size_t>(i) * 5 + j] ==
            doctest::Approx(m[static_cast<size_t>(j) * 5 + i]).epsilon(1e-12));
  }
}

TEST_CASE("independent action series show only small averaged correlations") {
  // 10 windows of 100 seasons: the averaged pairwise correlation of
  // independent coins stays inside +-0.1 with large margin.
  RngStream rng(2, "null");
  std::vector<std::vector<std::vector<int>>> traces(
      10, std::vector<std::vector<int>>(4, std::vector<int>(100, 0)));
  for (auto& window : traces)
    for (auto& series : window)
      for (auto& v : series) v = rng.bernoulli(0.5) ? 1 : 0;
  auto m = mean_correlation_matrix(traces);
  CHECK(max_offdiag_abs(m, 4) <= 0.1);
}

TEST_CASE("synchronized series are caught") {
  std::vector<std::vector<std::vector<int>>> traces(
      3, std::vector<std::vector<int>>(2, std::vector<int>(40, 0)));
  RngStream rng(3, "sync");
  for (auto& window : traces) {
    for (int t = 0; t < 40; ++t) {
      int v = rng.bernoulli(0.5) ? 1 : 0;
      window[0][static_cast<size_t>(t)] = v;
      window[1][static_cast<size_t>(t)] = v;
    }
  }
  auto m = mean_correlation_matrix(traces);
  CHECK(max_offdiag_abs(m, 2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("the independence band bounds the null and flags synchronization") {
  std::vector<double> freqs{0.4, 0.5, 0.6, 0.5};
  RngStream rng(4, "band");
  double band = independent_null_band(freqs, 5, 100, 200, rng);
  CHECK(band > 0.0);
  CHECK(band < 0.2);  // averaging five windows tightens the band well under 0.2
}

TEST_CASE("metrics tables round-trip through csv") {
  MetricsTable t;
  t.add("run-a", 0, "win_rate", 0.5);
  t.add("run-a", 1, "win_rate", 0.625);
  t.add("run-b", 0, "coverage", 1.0 / 3.0);
  auto path = (std::filesystem::temp_directory_path() / "abmrl_metrics_test.csv").string();
  t.write_csv(path);
  auto back = MetricsTable::read_csv(path);
  REQUIRE(back.rows.size() == 3);
  CHECK(back.rows[2].run_id == "run-b");
  CHECK(back.rows[2].metric == "coverage");
  CHECK(back.rows[2].value == 1.0 / 3.0);  // shortest round-trip formatting is exact
  CHECK(back.rows[1].step == 1);
  std::filesystem::remove(path);
}

TEST_CASE("csv output is byte-stable") {
  MetricsTable t;
  t.add("r", 0, "x", 0.1);
  t.add("r", 1, "x", 1e-17);
  t.add("r", 2, "x", 12345678.875);
  CHECK(t.csv() == t.csv());
  CHECK(t.csv().find("0.1\n") != std::string::npos);
}

TEST_CASE("mean and confidence interval") {
  std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  auto ci = mean_ci(xs);
  CHECK(ci.mean == doctest::Approx(2.5));
  // sd = sqrt(5/3), half width = 1.96 * sd / 2
  CHECK(ci.half_width == doctest::Approx(1.96 * std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-12));
  auto single = mean_ci(std::vector<double>{2.0});
  CHECK(single.mean == 2.0);
  CHECK(single.half_width == 0.0);
}

#pragma once

// Benchmark harness for the quadrotor comparison and the illustrative
// figure data.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rkhsbound/io.hpp"
#include "rkhsbound/scenarios.hpp"

namespace rkhsbound {

/// (bound - optimal) / (prior - optimal), clamped at 0 within 1e-8.
double suboptimality(double bound_value, double optimal_value, double prior_value);

inline const std::vector<std::string>& all_methods() {
  static const std::vector<std::string> m{"oracle-e",  "oracle-p", "alternating-p",   "reed-p",
                                          "dualgd-e",  "dualgd-p", "fixed-hashimoto", "fixed-yang"};
  return m;
}

struct BenchmarkConfig {
  std::string scenario{"quadrotor"};  // quadrotor | illustrative | file
  std::string problem_file;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<std::string> methods{all_methods()};
  int test_points{20};
  std::vector<Index> directions{0};  // output coordinates bounded from above
  QuadrotorConfig quadrotor;
  int dualgd_iterations{100};
  double dualgd_learning_rate{0.1};
  double alternating_target{1e-2};  // suboptimality w.r.t. oracle-p
  double reed_sigma{0};             // <= 0 selects the uniform noise bound
  std::string output{"benchmark.csv"};

  void validate() const;
  static BenchmarkConfig from_json(const Json& j);
  Json to_json() const;
};

struct RunRecord {
  std::string method;
  std::string tag;  // e | p
  std::uint64_t seed{0};
  int test_point{0};
  double x{0};
  Index direction{0};
  double value{0};
  double optimal{0};  // oracle-e
  double reference{std::numeric_limits<double>::quiet_NaN()};  // oracle-p, point-wise methods only
  double prior{0};
  double suboptimality{0};
  double seconds{0};
  std::string status;
  bool excluded{false};
  std::string note;
};

struct BenchmarkRow {
  std::string method;
  std::string tag;
  double sub_min{0}, sub_avg{0}, sub_max{0};
  double t_min{0}, t_avg{0}, t_max{0};
  int runs{0};
  int excluded{0};
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;
  std::vector<RunRecord> runs;
  BenchmarkConfig config;
};

BenchmarkResult run_benchmark(const BenchmarkConfig& config);

/// Aggregate rows from run records in method order of `methods`.
std::vector<BenchmarkRow> aggregate(const std::vector<RunRecord>& runs, const std::vector<std::string>& methods);

void write_csv(const std::vector<BenchmarkRow>& rows, const std::string& path);
Json sidecar_json(const BenchmarkResult& result);
/// CSV at config.output and the JSON sidecar next to it (output + ".json").
void write_benchmark(const BenchmarkResult& result);

struct Fig1Row {
  double x{0};
  double optimal_upper{0};
  double optimal_lower{0};
  double dual_upper{0};  // dual function at the upper sigma* of the anchor
  double dual_lower{0};
  double truth{0};
  VectorXd sigma_upper;
  VectorXd sigma_lower;
};

struct Fig1Data {
  std::vector<Fig1Row> rows;
  Index anchor{0};
  VectorXd anchor_sigma_upper;
  VectorXd anchor_sigma_lower;
};

/// Optimal two-sided bound along a 1-D grid and the dual functions frozen at
/// the sigma* of the anchor point.
Fig1Data fig1_data(const IllustrativeScenario& scenario);
void write_fig1_csv(const Fig1Data& data, double cap, const std::string& path);
Fig1Data emit_fig1_data(const IllustrativeScenario& scenario, const std::string& path);

}  // namespace rkhsbound

#pragma once

#include <string>
#include <utility>
#include <vector>

namespace reclab {

// Per-(arm, iteration, phase) metric means over replications, reduced
// directly from a metrics.csv file.
struct ReducedRow {
  std::string arm;
  int iteration = 0;
  std::string phase;
  std::vector<std::pair<std::string, double>> metrics;  // (name, mean)
  int reps = 0;
};

std::vector<ReducedRow> reduce_metrics_csv(const std::string& csv_path);

// Joins per-arm metrics from <experiment_dir>/metrics.csv and writes
// report.csv: one row per arm/iteration/phase/metric with the replication
// mean and the delta against the baseline arm's final row (arm "sft_only"
// when present, else the first arm).
void emit_report(const std::string& experiment_dir);

}  // namespace reclab

#include "reclab/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace fs = std::filesystem;

namespace reclab {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

std::vector<ReducedRow> reduce_metrics_csv(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("missing metrics file: " + csv_path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty metrics file: " + csv_path);
  const auto header = split_csv(line);
  if (header.size() < 4 || header[0] != "arm" || header[1] != "iteration" ||
      header[2] != "phase")
    throw std::runtime_error("schema mismatch in " + csv_path);
  const std::vector<std::string> metric_names(header.begin() + 3, header.end());

  struct Acc {
    std::vector<double> sums;
    int count = 0;
    int first_seen = 0;
  };
  std::map<std::tuple<std::string, int, std::string>, Acc> acc;
  int order = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw std::runtime_error("schema mismatch in " + csv_path + ": bad row width");
    const std::string& arm = cells[0];
    const int iteration = std::stoi(cells[1]);
    const std::string& phase = cells[2];
    auto& a = acc[{arm, iteration, phase}];
    if (a.sums.empty()) {
      a.sums.assign(metric_names.size(), 0.0);
      a.first_seen = order;
    }
    for (std::size_t m = 0; m < metric_names.size(); ++m)
      a.sums[m] += std::stod(cells[3 + m]);
    a.count++;
    order++;
  }
  if (acc.empty()) throw std::runtime_error("no data rows in " + csv_path);

  // Preserve file order rather than map order.
  std::vector<std::pair<int, std::tuple<std::string, int, std::string>>> keys;
  for (const auto& [key, a] : acc) keys.emplace_back(a.first_seen, key);
  std::sort(keys.begin(), keys.end());

  std::vector<ReducedRow> rows;
  for (const auto& [seen, key] : keys) {
    const auto& a = acc.at(key);
    ReducedRow row;
    row.arm = std::get<0>(key);
    row.iteration = std::get<1>(key);
    row.phase = std::get<2>(key);
    row.reps = a.count;
    for (std::size_t m = 0; m < metric_names.size(); ++m)
      row.metrics.emplace_back(metric_names[m], a.sums[m] / static_cast<double>(a.count));
    rows.push_back(std::move(row));
  }
  return rows;
}

void emit_report(const std::string& experiment_dir) {
  const fs::path dir(experiment_dir);
  if (!fs::exists(dir / "metrics.csv"))
    throw std::runtime_error("missing input: " + (dir / "metrics.csv").string());
  const auto rows = reduce_metrics_csv((dir / "metrics.csv").string());

  // Baseline: sft_only when present, else the first arm; use its last row.
  std::string baseline_arm = rows.front().arm;
  for (const auto& r : rows)
    if (r.arm == "sft_only") {
      baseline_arm = "sft_only";
      break;
    }
  const ReducedRow* baseline = nullptr;
  for (const auto& r : rows)
    if (r.arm == baseline_arm) baseline = &r;  // last row of that arm wins

  std::ofstream out(dir / "report.csv", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report.csv");
  out << "arm,iteration,phase,metric,mean,delta_vs_" << baseline_arm << ",reps\n";
  for (const auto& r : rows) {
    for (std::size_t m = 0; m < r.metrics.size(); ++m) {
      const auto& [name, mean] = r.metrics[m];
      const double base = baseline->metrics[m].second;
      out << r.arm << ',' << r.iteration << ',' << r.phase << ',' << name << ','
          << fmt_double(mean) << ',' << fmt_double(mean - base) << ',' << r.reps << "\n";
    }
  }
}

}  // namespace reclab

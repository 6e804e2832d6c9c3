#include "reclab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

namespace reclab {

namespace {

void check_nonempty(const RecommendationLog& log, const char* op) {
  if (log.empty()) throw std::invalid_argument(std::string(op) + ": empty log");
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

std::pair<double, double> hr_ndcg_at_k(const RecommendationLog& log, int k) {
  check_nonempty(log, "hr_ndcg_at_k");
  if (k < 1) throw std::invalid_argument("hr_ndcg_at_k: k must be >= 1");
  double hr = 0.0, ndcg = 0.0;
  for (const auto& e : log) {
    if (e.rank_of_truth < 1) throw std::invalid_argument("hr_ndcg_at_k: bad rank");
    if (e.rank_of_truth <= k) {
      hr += 1.0;
      ndcg += 1.0 / std::log2(static_cast<double>(e.rank_of_truth) + 1.0);
    }
  }
  const double m = static_cast<double>(log.size());
  return {hr / m, ndcg / m};
}

double div_ratio(const RecommendationLog& log) {
  check_nonempty(log, "div_ratio");
  std::set<int> unique;
  for (const auto& e : log) unique.insert(e.recommended);
  return static_cast<double>(unique.size()) / static_cast<double>(log.size());
}

double or_ratio(const RecommendationLog& log, int top_m) {
  check_nonempty(log, "or_ratio");
  if (top_m < 1) throw std::invalid_argument("or_ratio: top_m must be >= 1");
  std::map<int, long long> freq;  // ordered by item id
  for (const auto& e : log) freq[e.recommended]++;
  std::vector<std::pair<long long, int>> by_count;  // (count, id)
  by_count.reserve(freq.size());
  for (const auto& [item, count] : freq) by_count.emplace_back(count, item);
  std::stable_sort(by_count.begin(), by_count.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  long long covered = 0;
  const int take = std::min<int>(top_m, static_cast<int>(by_count.size()));
  for (int i = 0; i < take; ++i) covered += by_count[static_cast<std::size_t>(i)].first;
  return static_cast<double>(covered) / static_cast<double>(log.size());
}

std::vector<double> group_share(const RecommendationLog& log, const ItemCatalog& catalog) {
  check_nonempty(log, "group_share");
  std::vector<double> share(static_cast<std::size_t>(catalog.n_groups), 0.0);
  for (const auto& e : log) {
    const int g = catalog.group_of[static_cast<std::size_t>(e.recommended)];
    share[static_cast<std::size_t>(g)] += 1.0;
  }
  for (double& s : share) s /= static_cast<double>(log.size());
  return share;
}

std::pair<std::vector<double>, double> group_unfairness(std::span<const double> rec_category_dist,
                                                        std::span<const double> hist_category_dist) {
  if (rec_category_dist.size() != hist_category_dist.size())
    throw std::invalid_argument("group_unfairness: category count mismatch");
  if (rec_category_dist.empty())
    throw std::invalid_argument("group_unfairness: empty distributions");
  std::vector<double> gu(rec_category_dist.size());
  double mgu = 0.0;
  for (std::size_t c = 0; c < gu.size(); ++c) {
    gu[c] = std::abs(rec_category_dist[c] - hist_category_dist[c]);
    mgu += gu[c];
  }
  mgu /= static_cast<double>(gu.size());
  return {std::move(gu), mgu};
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("total_variation: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

std::vector<double> recommendation_category_distribution(const RecommendationLog& log,
                                                         const ItemCatalog& catalog) {
  check_nonempty(log, "recommendation_category_distribution");
  std::vector<double> p(static_cast<std::size_t>(catalog.n_categories), 0.0);
  for (const auto& e : log)
    p[static_cast<std::size_t>(catalog.category_of[static_cast<std::size_t>(e.recommended)])] += 1.0;
  for (double& x : p) x /= static_cast<double>(log.size());
  return p;
}

std::string metrics_csv_header(int n_groups) {
  std::string h = "arm,iteration,phase,hr,ndcg,div_ratio,or_ratio,mgu";
  for (int g = 0; g < n_groups; ++g) h += ",group_share_" + std::to_string(g);
  h += ",tv_to_popularity";
  return h;
}

std::string metrics_csv_row(const std::string& arm, int iteration, const std::string& phase,
                            const MetricsReport& report) {
  std::string row = arm + "," + std::to_string(iteration) + "," + phase;
  row += "," + fmt_double(report.hr_at_k);
  row += "," + fmt_double(report.ndcg_at_k);
  row += "," + fmt_double(report.div_ratio);
  row += "," + fmt_double(report.or_ratio);
  row += "," + fmt_double(report.mgu);
  for (double s : report.group_share) row += "," + fmt_double(s);
  row += "," + fmt_double(report.tv_to_popularity);
  return row;
}

}  // namespace reclab

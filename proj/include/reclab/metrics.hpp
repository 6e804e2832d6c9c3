#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reclab/catalog.hpp"

namespace reclab {

// One evaluation case: the item the policy recommended for a context, the
// held-out ground-truth item, and the ground truth's position (1-based) in
// the policy's full-space ranking.
struct RecEntry {
  int context = 0;
  int recommended = 0;
  int ground_truth = 0;
  int rank_of_truth = 1;
};

using RecommendationLog = std::vector<RecEntry>;

struct MetricsReport {
  double hr_at_k = 0.0;
  double ndcg_at_k = 0.0;
  double div_ratio = 0.0;
  double or_ratio = 0.0;
  double mgu = 0.0;
  std::vector<double> gu_per_category;
  std::vector<double> group_share;
  double tv_to_popularity = 0.0;
};

// Single relevant item: HR hit if rank <= k, NDCG contribution 1/log2(rank+1).
std::pair<double, double> hr_ndcg_at_k(const RecommendationLog& log, int k);

// Unique recommended items / entries.
double div_ratio(const RecommendationLog& log);

// Combined share of the top_m most frequently recommended items
// (frequency ties broken by item id ascending).
double or_ratio(const RecommendationLog& log, int top_m = 3);

// Fraction of recommendations landing in each popularity group.
std::vector<double> group_share(const RecommendationLog& log, const ItemCatalog& catalog);

// GU(c) = |rec(c) - hist(c)| per category; MGU is the mean gap.
std::pair<std::vector<double>, double> group_unfairness(std::span<const double> rec_category_dist,
                                                        std::span<const double> hist_category_dist);

// (1/2) sum |p - q|.
double total_variation(std::span<const double> p, std::span<const double> q);

// Category marginal of the recommended items.
std::vector<double> recommendation_category_distribution(const RecommendationLog& log,
                                                         const ItemCatalog& catalog);

// Fixed CSV schema for one report row.
std::string metrics_csv_header(int n_groups);
std::string metrics_csv_row(const std::string& arm, int iteration, const std::string& phase,
                            const MetricsReport& report);

}  // namespace reclab

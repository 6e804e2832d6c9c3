#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

namespace reclab {

// Synthetic recommendation world: items with category labels, a ground-truth
// per-context popularity distribution, and popularity-quantile groups
// (group 0 least popular, group G-1 most popular).
struct ItemCatalog {
  int n_items = 0;
  int n_categories = 0;
  int n_contexts = 0;
  int n_groups = 1;
  std::vector<int> category_of;                 // item -> category
  std::vector<int> group_of;                    // item -> group
  std::vector<std::vector<double>> popularity;  // [context][item]
  double zipf_exponent = 0.0;                   // provenance
  std::uint64_t seed = 0;                       // provenance

  std::span<const double> popularity_of(int context) const {
    return popularity[static_cast<std::size_t>(context)];
  }
  // Mean popularity over contexts, the grouping key.
  std::vector<double> marginal_popularity() const;
};

// Logged positive interactions, plus a per-context count table kept in sync.
struct InteractionSet {
  std::vector<std::pair<int, int>> records;   // (context, item)
  std::vector<std::vector<long long>> counts;  // [context][item]

  std::size_t size() const { return records.size(); }
};

// Popularity is a seeded random permutation of the normalized Zipf(s) law;
// s = 0 degenerates to uniform. Categories are assigned round-robin then
// shuffled, unless correlated_categories ties them to popularity rank.
ItemCatalog build_catalog(int n_items, int n_categories, int n_contexts,
                          double zipf_exponent, std::uint64_t seed,
                          bool correlated_categories = false);

// Splits items into n_groups contiguous blocks of the popularity-ascending
// order; block sizes are near-equal with the remainder going to the most
// popular groups; ties broken by item id.
ItemCatalog assign_popularity_groups(ItemCatalog catalog, int n_groups);

// I.i.d. draws: context uniform, then item ~ popularity(context).
InteractionSet sample_interactions(const ItemCatalog& catalog, int n_samples,
                                   std::uint64_t seed);

// Normalized counts for one context; throws if the context has no records.
std::vector<double> empirical_distribution(const InteractionSet& interactions,
                                           const ItemCatalog& catalog, int context);

// Category marginal of the records (history distribution for fairness metrics).
std::vector<double> category_distribution(const InteractionSet& interactions,
                                          const ItemCatalog& catalog);

InteractionSet make_interactions(std::vector<std::pair<int, int>> records,
                                 const ItemCatalog& catalog);

nlohmann::json to_json(const ItemCatalog& catalog);
ItemCatalog catalog_from_json(const nlohmann::json& j);

}  // namespace reclab

#include "reclab/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "reclab/rng.hpp"

namespace reclab {

std::vector<double> ItemCatalog::marginal_popularity() const {
  std::vector<double> m(static_cast<std::size_t>(n_items), 0.0);
  for (const auto& row : popularity)
    for (int y = 0; y < n_items; ++y) m[static_cast<std::size_t>(y)] += row[static_cast<std::size_t>(y)];
  for (double& x : m) x /= static_cast<double>(n_contexts);
  return m;
}

ItemCatalog build_catalog(int n_items, int n_categories, int n_contexts,
                          double zipf_exponent, std::uint64_t seed,
                          bool correlated_categories) {
  if (n_items < 2) throw std::invalid_argument("build_catalog: n_items must be >= 2");
  if (n_categories < 1 || n_categories > n_items)
    throw std::invalid_argument("build_catalog: n_categories out of range");
  if (n_contexts < 1) throw std::invalid_argument("build_catalog: n_contexts must be >= 1");
  if (zipf_exponent < 0.0)
    throw std::invalid_argument("build_catalog: zipf_exponent must be >= 0");

  ItemCatalog cat;
  cat.n_items = n_items;
  cat.n_categories = n_categories;
  cat.n_contexts = n_contexts;
  cat.zipf_exponent = zipf_exponent;
  cat.seed = seed;

  // Normalized Zipf weights, descending in rank.
  std::vector<double> base(static_cast<std::size_t>(n_items));
  double total = 0.0;
  for (int k = 0; k < n_items; ++k) {
    base[static_cast<std::size_t>(k)] = std::pow(static_cast<double>(k + 1), -zipf_exponent);
    total += base[static_cast<std::size_t>(k)];
  }
  for (double& w : base) w /= total;

  cat.popularity.resize(static_cast<std::size_t>(n_contexts));
  for (int c = 0; c < n_contexts; ++c) {
    std::vector<int> perm(static_cast<std::size_t>(n_items));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, 0x5EED, static_cast<std::uint64_t>(c)));
    rng.shuffle(perm);
    auto& row = cat.popularity[static_cast<std::size_t>(c)];
    row.assign(static_cast<std::size_t>(n_items), 0.0);
    for (int k = 0; k < n_items; ++k)
      row[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] =
          base[static_cast<std::size_t>(k)];
  }

  cat.category_of.resize(static_cast<std::size_t>(n_items));
  if (correlated_categories) {
    // Categories follow popularity rank (context 0), ascending blocks.
    std::vector<int> order(static_cast<std::size_t>(n_items));
    std::iota(order.begin(), order.end(), 0);
    const auto& pop0 = cat.popularity[0];
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      const double pa = pop0[static_cast<std::size_t>(a)];
      const double pb = pop0[static_cast<std::size_t>(b)];
      if (pa != pb) return pa < pb;
      return a < b;
    });
    for (int r = 0; r < n_items; ++r)
      cat.category_of[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] =
          static_cast<int>((static_cast<long long>(r) * n_categories) / n_items);
  } else {
    for (int y = 0; y < n_items; ++y)
      cat.category_of[static_cast<std::size_t>(y)] = y % n_categories;
    Rng rng(derive_seed(seed, 0xCA75));
    rng.shuffle(cat.category_of);
  }

  cat.n_groups = 1;
  cat.group_of.assign(static_cast<std::size_t>(n_items), 0);
  return cat;
}

ItemCatalog assign_popularity_groups(ItemCatalog catalog, int n_groups) {
  if (n_groups < 2) throw std::invalid_argument("assign_popularity_groups: n_groups must be >= 2");
  if (n_groups > catalog.n_items)
    throw std::invalid_argument("assign_popularity_groups: n_groups exceeds n_items");

  const std::vector<double> pop = catalog.marginal_popularity();
  std::vector<int> order(static_cast<std::size_t>(catalog.n_items));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double pa = pop[static_cast<std::size_t>(a)];
    const double pb = pop[static_cast<std::size_t>(b)];
    if (pa != pb) return pa < pb;
    return a < b;
  });

  const int base = catalog.n_items / n_groups;
  const int rem = catalog.n_items % n_groups;
  catalog.n_groups = n_groups;
  catalog.group_of.assign(static_cast<std::size_t>(catalog.n_items), 0);
  int pos = 0;
  for (int g = 0; g < n_groups; ++g) {
    const int size = base + (g >= n_groups - rem ? 1 : 0);
    for (int i = 0; i < size; ++i)
      catalog.group_of[static_cast<std::size_t>(order[static_cast<std::size_t>(pos++)])] = g;
  }
  return catalog;
}

InteractionSet sample_interactions(const ItemCatalog& catalog, int n_samples,
                                   std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("sample_interactions: n_samples must be >= 1");
  Rng rng(seed);
  InteractionSet out;
  out.records.reserve(static_cast<std::size_t>(n_samples));
  out.counts.assign(static_cast<std::size_t>(catalog.n_contexts),
                    std::vector<long long>(static_cast<std::size_t>(catalog.n_items), 0));
  for (int i = 0; i < n_samples; ++i) {
    const int c = catalog.n_contexts == 1 ? 0 : rng.uniform_int(catalog.n_contexts);
    const int y = rng.categorical(catalog.popularity_of(c));
    out.records.emplace_back(c, y);
    out.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(y)]++;
  }
  return out;
}

InteractionSet make_interactions(std::vector<std::pair<int, int>> records,
                                 const ItemCatalog& catalog) {
  InteractionSet out;
  out.counts.assign(static_cast<std::size_t>(catalog.n_contexts),
                    std::vector<long long>(static_cast<std::size_t>(catalog.n_items), 0));
  for (auto [c, y] : records) {
    if (c < 0 || c >= catalog.n_contexts || y < 0 || y >= catalog.n_items)
      throw std::invalid_argument("make_interactions: record out of range");
    out.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(y)]++;
  }
  out.records = std::move(records);
  return out;
}

std::vector<double> empirical_distribution(const InteractionSet& interactions,
                                           const ItemCatalog& catalog, int context) {
  if (context < 0 || context >= catalog.n_contexts)
    throw std::invalid_argument("empirical_distribution: context out of range");
  const auto& cnt = interactions.counts[static_cast<std::size_t>(context)];
  long long total = 0;
  for (long long c : cnt) total += c;
  if (total == 0)
    throw std::runtime_error("empirical_distribution: no records for context");
  std::vector<double> p(cnt.size());
  for (std::size_t y = 0; y < cnt.size(); ++y)
    p[y] = static_cast<double>(cnt[y]) / static_cast<double>(total);
  return p;
}

std::vector<double> category_distribution(const InteractionSet& interactions,
                                          const ItemCatalog& catalog) {
  if (interactions.records.empty())
    throw std::invalid_argument("category_distribution: empty interaction set");
  std::vector<double> p(static_cast<std::size_t>(catalog.n_categories), 0.0);
  for (auto [c, y] : interactions.records)
    p[static_cast<std::size_t>(catalog.category_of[static_cast<std::size_t>(y)])] += 1.0;
  for (double& x : p) x /= static_cast<double>(interactions.records.size());
  return p;
}

nlohmann::json to_json(const ItemCatalog& catalog) {
  return nlohmann::json{
      {"n_items", catalog.n_items},
      {"n_categories", catalog.n_categories},
      {"n_contexts", catalog.n_contexts},
      {"n_groups", catalog.n_groups},
      {"category_of", catalog.category_of},
      {"group_of", catalog.group_of},
      {"popularity", catalog.popularity},
      {"zipf_exponent", catalog.zipf_exponent},
      {"seed", catalog.seed},
  };
}

ItemCatalog catalog_from_json(const nlohmann::json& j) {
  ItemCatalog cat;
  cat.n_items = j.at("n_items").get<int>();
  cat.n_categories = j.at("n_categories").get<int>();
  cat.n_contexts = j.at("n_contexts").get<int>();
  cat.n_groups = j.at("n_groups").get<int>();
  cat.category_of = j.at("category_of").get<std::vector<int>>();
  cat.group_of = j.at("group_of").get<std::vector<int>>();
  cat.popularity = j.at("popularity").get<std::vector<std::vector<double>>>();
  cat.zipf_exponent = j.at("zipf_exponent").get<double>();
  cat.seed = j.at("seed").get<std::uint64_t>();
  return cat;
}

}  // namespace reclab

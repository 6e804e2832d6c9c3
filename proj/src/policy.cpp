#include "reclab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "reclab/numeric.hpp"

namespace reclab {

Policy::Policy(int n_contexts, int n_items)
    : n_contexts_(n_contexts), n_items_(n_items) {
  if (n_contexts < 1 || n_items < 1)
    throw std::invalid_argument("Policy: shape must be positive");
  logits_.assign(static_cast<std::size_t>(n_contexts) * static_cast<std::size_t>(n_items), 0.0);
}

void Policy::check_context(int context) const {
  if (context < 0 || context >= n_contexts_)
    throw std::invalid_argument("Policy: context out of range");
}

std::span<double> Policy::logits_row(int context) {
  check_context(context);
  return {logits_.data() + static_cast<std::size_t>(context) * static_cast<std::size_t>(n_items_),
          static_cast<std::size_t>(n_items_)};
}

std::span<const double> Policy::logits_row(int context) const {
  check_context(context);
  return {logits_.data() + static_cast<std::size_t>(context) * static_cast<std::size_t>(n_items_),
          static_cast<std::size_t>(n_items_)};
}

std::vector<double> Policy::softmax_probs(int context) const {
  return softmax(logits_row(context));
}

std::vector<double> Policy::log_probs(int context) const {
  return log_softmax(logits_row(context));
}

int Policy::sample_item(int context, Rng& rng) const {
  const auto p = softmax_probs(context);
  return rng.categorical(p);
}

std::vector<int> Policy::top_k_items(int context, int k) const {
  if (k < 1 || k > n_items_)
    throw std::invalid_argument("top_k_items: k out of range");
  const auto row = logits_row(context);
  std::vector<int> order(static_cast<std::size_t>(n_items_));
  std::iota(order.begin(), order.end(), 0);
  // Logit order equals probability order within a row.
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double la = row[static_cast<std::size_t>(a)];
    const double lb = row[static_cast<std::size_t>(b)];
    if (la != lb) return la > lb;
    return a < b;
  });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

std::vector<int> Policy::beam_negatives(int context, int n, int exclude) const {
  if (n < 1 || n > n_items_ - 1)
    throw std::invalid_argument("beam_negatives: n out of range for catalog");
  const int pool_size = std::min(2 * n, n_items_);
  auto pool = top_k_items(context, pool_size);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int y : pool) {
    if (y == exclude) continue;
    out.push_back(y);
    if (static_cast<int>(out.size()) == n) break;
  }
  return out;
}

void Policy::center_rows() {
  for (int c = 0; c < n_contexts_; ++c) {
    auto row = logits_row(c);
    double mean = 0.0;
    for (double x : row) mean += x;
    mean /= static_cast<double>(n_items_);
    for (double& x : row) x -= mean;
  }
}

bool Policy::all_finite() const {
  for (double x : logits_)
    if (!std::isfinite(x)) return false;
  return true;
}

nlohmann::json Policy::to_json() const {
  return nlohmann::json{
      {"n_contexts", n_contexts_}, {"n_items", n_items_}, {"logits", logits_}};
}

Policy Policy::from_json(const nlohmann::json& j) {
  Policy p(j.at("n_contexts").get<int>(), j.at("n_items").get<int>());
  auto logits = j.at("logits").get<std::vector<double>>();
  if (logits.size() != p.logits_.size())
    throw std::invalid_argument("Policy::from_json: logits size mismatch");
  p.logits_ = std::move(logits);
  return p;
}

}  // namespace reclab

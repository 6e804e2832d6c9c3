#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "reclab/rng.hpp"

namespace reclab {

// Tabular softmax policy: one logit row per context. Value-semantic, so a
// copy is a frozen snapshot usable as a reference policy.
class Policy {
 public:
  Policy() = default;
  // All-zero logits, i.e. the uniform policy.
  Policy(int n_contexts, int n_items);

  int n_contexts() const { return n_contexts_; }
  int n_items() const { return n_items_; }

  std::span<double> logits_row(int context);
  std::span<const double> logits_row(int context) const;
  std::span<double> logits_flat() { return logits_; }
  std::span<const double> logits_flat() const { return logits_; }

  // Max-subtracted softmax of a logit row.
  std::vector<double> softmax_probs(int context) const;
  std::vector<double> log_probs(int context) const;

  int sample_item(int context, Rng& rng) const;

  // Items by probability descending, ties by item id ascending.
  std::vector<int> top_k_items(int context, int k) const;

  // Top-2n pool by probability, drop the excluded item, return the first n.
  std::vector<int> beam_negatives(int context, int n, int exclude) const;

  // Re-centers each logit row to zero mean; softmax is shift-invariant.
  void center_rows();

  bool all_finite() const;

  nlohmann::json to_json() const;
  static Policy from_json(const nlohmann::json& j);

 private:
  void check_context(int context) const;

  int n_contexts_ = 0;
  int n_items_ = 0;
  std::vector<double> logits_;  // row-major
};

}  // namespace reclab

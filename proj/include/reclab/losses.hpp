#pragma once

#include <span>
#include <string>
#include <vector>

#include "reclab/catalog.hpp"
#include "reclab/policy.hpp"

namespace reclab {

// Scalar objective plus its analytic gradient with respect to every policy
// logit. Each gradient row lies on the simplex tangent (sums to ~0).
struct LossValue {
  double value = 0.0;
  std::vector<double> grad;  // same shape as Policy logits, row-major
};

enum class NegSource { uniform, self_play, beam, mixed };

// (context, chosen item, rejected items) with the provenance of the
// negative-sampling strategy that produced it.
struct PreferenceTriple {
  int context = 0;
  int chosen = 0;
  std::vector<int> rejected;
  NegSource source = NegSource::uniform;
};

void validate_triple(const PreferenceTriple& t, int n_contexts, int n_items);

std::string to_string(NegSource s);
NegSource neg_source_from_string(const std::string& s);

// Mean negative log-likelihood of the positives.
LossValue sft_loss(const Policy& policy, const InteractionSet& interactions);

// Exact-expectation variant: cross-entropy of a target distribution against
// one policy row (the infinite-sample limit of sft_loss).
LossValue sft_exact_loss(const Policy& policy, std::span<const double> target,
                         int context);

// KL(p || softmax(policy row)), in nats. +inf if p puts mass where the
// policy's log-probability is -inf.
double forward_kl(std::span<const double> p, const Policy& policy, int context);

// -log sigma(beta * [log-ratio margin]) for a single rejected item,
// computed entirely in the log domain.
LossValue dpo_pair_loss(const Policy& policy, const Policy& ref,
                        const PreferenceTriple& triple, double beta);

// Mean of the pairwise loss over the rejected list (single chosen item).
LossValue multi_negative_dpo_loss(const Policy& policy, const Policy& ref,
                                  const PreferenceTriple& triple, double beta);

// Mean over a batch of triples; multi-negative triples contribute their mean.
LossValue dpo_batch_loss(const Policy& policy, const Policy& ref,
                         std::span<const PreferenceTriple> triples, double beta);

// Full enumeration sum_{y_w, y_l} p(y_w) q(y_l) weight(y_l) pair_term(y_w, y_l)
// over one context. weight == 1 gives the exact pairwise objective; weight =
// pi_t/q gives the exact self-play objective.
LossValue exact_weighted_dpo_loss(const Policy& policy, const Policy& ref,
                                  std::span<const double> p, std::span<const double> q,
                                  std::span<const double> weight, double beta,
                                  int context);

// Single-row enumeration kernel shared with the closed-form verifiers.
// score[y] is the policy/reference log-probability gap; the pairwise margin
// beta * (score[y_w] - score[y_l]) is linear in the logits, so grad is the
// exact logit gradient for the row.
struct RowLoss {
  double value = 0.0;
  std::vector<double> grad;
};

RowLoss enumerated_pair_loss(std::span<const double> score, std::span<const double> p,
                             std::span<const double> q, std::span<const double> weight,
                             double beta);

// Plain single-threaded implementations kept as the reference the OpenMP
// kernels are tested against.
namespace serial {
RowLoss enumerated_pair_loss(std::span<const double> score, std::span<const double> p,
                             std::span<const double> q, std::span<const double> weight,
                             double beta);
LossValue dpo_batch_loss(const Policy& policy, const Policy& ref,
                         std::span<const PreferenceTriple> triples, double beta);
LossValue sft_loss(const Policy& policy, const InteractionSet& interactions);
}  // namespace serial

}  // namespace reclab

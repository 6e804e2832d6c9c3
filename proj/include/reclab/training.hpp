#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "reclab/catalog.hpp"
#include "reclab/losses.hpp"
#include "reclab/metrics.hpp"
#include "reclab/policy.hpp"
#include "reclab/rng.hpp"

namespace reclab {

enum class Phase { init, post_sft, post_dpo };
std::string to_string(Phase p);

struct TrainConfig {
  double beta = 0.5;
  double lr_sft = 0.5;
  double lr_dpo = 0.1;
  int sft_epochs = 200;  // full-batch epochs per step
  int dpo_epochs = 200;
  int iterations = 5;  // T
  NegSource neg_strategy = NegSource::self_play;
  int n_negatives = 1;
  double contamination = 0.0;       // rho, used by the mixed strategy
  double subsample_fraction = 0.5;  // per-iteration training-data fraction
  std::uint64_t seed = 0;
  // Reference snapshot for the pairwise step: the iteration's post-SFT
  // policy (default) or the pre-SFT policy the negatives were sampled from.
  bool ref_is_post_sft = true;
};

void validate(const TrainConfig& cfg);

struct Snapshot {
  int iteration = 0;
  Phase phase = Phase::init;
  Policy policy;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
  // One report per snapshot when an evaluator is supplied, else empty.
  std::vector<MetricsReport> metrics;
};

// Called on every recorded snapshot.
using Evaluator = std::function<MetricsReport(const Policy&, int iteration, Phase phase)>;

// One triple per positive, negatives drawn per strategy:
//   self_play  sample from policy_t, resample on collision with the positive
//              (100 retries, then ranked fallback)
//   uniform    uniform over items excluding the positive
//   beam       top-probability negatives via beam_negatives
//   mixed      self_play, each negative independently replaced by a uniform
//              draw with probability rho
// The rng only seeds per-purpose streams, so mixed(0)/mixed(1) reproduce the
// pure strategies exactly.
std::vector<PreferenceTriple> build_preference_triples(const Policy& policy_t,
                                                       const InteractionSet& interactions,
                                                       const TrainConfig& cfg, Rng& rng);

// Without-replacement subsample of round(fraction * size) records, original
// order preserved; fraction == 1 returns the input unchanged.
InteractionSet subsample_interactions(const InteractionSet& interactions,
                                      const ItemCatalog& catalog, double fraction,
                                      std::uint64_t seed);

// Full-batch gradient-descent epochs on the positive log-likelihood.
Policy sft_step(Policy policy, const InteractionSet& interactions, const TrainConfig& cfg);

// Full-batch epochs on the pairwise batch loss against a fixed reference.
Policy dpo_step(Policy policy, const Policy& ref_snapshot,
                std::span<const PreferenceTriple> triples, const TrainConfig& cfg);

// The iterated loop: per iteration, subsample positives, build triples from
// the current snapshot, run an SFT step, then a pairwise step whose reference
// is chosen by cfg.ref_is_post_sft.
Trajectory self_play_run(const Policy& init_policy, const InteractionSet& interactions,
                         const ItemCatalog& catalog, const TrainConfig& cfg,
                         const Evaluator& evaluator = nullptr);

// Single SFT phase then a single pairwise phase with uniform negatives;
// identical to self_play_run with T = 1 and the uniform strategy.
Trajectory dpo_baseline_run(const Policy& init_policy, const InteractionSet& interactions,
                            const ItemCatalog& catalog, const TrainConfig& cfg,
                            const Evaluator& evaluator = nullptr);

// SFT phase only (no pairwise step); records init and post_sft snapshots.
Trajectory sft_only_run(const Policy& init_policy, const InteractionSet& interactions,
                        const ItemCatalog& catalog, const TrainConfig& cfg,
                        const Evaluator& evaluator = nullptr);

}  // namespace reclab

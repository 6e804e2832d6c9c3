#include "reclab/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "reclab/errors.hpp"
#include "reclab/numeric.hpp"

namespace reclab {

namespace {

// Stream ids for per-iteration seed derivation.
enum : std::uint64_t {
  kStreamSubsample = 1,
  kStreamTriples = 2,
};

void apply_step(Policy& policy, const std::vector<double>& grad, double lr,
                const char* who) {
  auto flat = policy.logits_flat();
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] -= lr * grad[i];
  if (!policy.all_finite())
    throw divergence_error(std::string(who) + ": non-finite logits");
}

int draw_uniform_negative(Rng& rng, int n_items, int chosen,
                          const std::vector<int>& taken) {
  for (;;) {
    const int y = rng.uniform_int(n_items);
    if (y == chosen) continue;
    if (std::find(taken.begin(), taken.end(), y) != taken.end()) continue;
    return y;
  }
}

}  // namespace

std::string to_string(Phase p) {
  switch (p) {
    case Phase::init: return "init";
    case Phase::post_sft: return "post_sft";
    case Phase::post_dpo: return "post_dpo";
  }
  return "init";
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.beta > 0.0)) throw std::invalid_argument("TrainConfig.beta: must be > 0");
  if (cfg.lr_sft < 0.0) throw std::invalid_argument("TrainConfig.lr_sft: must be >= 0");
  if (cfg.lr_dpo < 0.0) throw std::invalid_argument("TrainConfig.lr_dpo: must be >= 0");
  if (cfg.sft_epochs < 0) throw std::invalid_argument("TrainConfig.sft_epochs: must be >= 0");
  if (cfg.dpo_epochs < 0) throw std::invalid_argument("TrainConfig.dpo_epochs: must be >= 0");
  if (cfg.iterations < 1) throw std::invalid_argument("TrainConfig.iterations: must be >= 1");
  if (cfg.n_negatives < 1) throw std::invalid_argument("TrainConfig.n_negatives: must be >= 1");
  if (cfg.contamination < 0.0 || cfg.contamination > 1.0)
    throw std::invalid_argument("TrainConfig.contamination: must be in [0, 1]");
  if (!(cfg.subsample_fraction > 0.0) || cfg.subsample_fraction > 1.0)
    throw std::invalid_argument("TrainConfig.subsample_fraction: must be in (0, 1]");
}

std::vector<PreferenceTriple> build_preference_triples(const Policy& policy_t,
                                                       const InteractionSet& interactions,
                                                       const TrainConfig& cfg, Rng& rng) {
  if (interactions.records.empty())
    throw std::invalid_argument("build_preference_triples: empty interaction set");
  const int n = policy_t.n_items();
  if (n < 2)
    throw std::invalid_argument("build_preference_triples: catalog has no valid negative");
  if (cfg.n_negatives > n - 1)
    throw std::invalid_argument("build_preference_triples: n_negatives too large for catalog");

  // Dedicated streams per purpose. The pure strategies each consume exactly
  // one of them, so mixed(rho=0) matches self_play and mixed(rho=1) matches
  // uniform, draw for draw.
  Rng sp_rng(rng.next_u64());
  Rng uni_rng(rng.next_u64());
  Rng coin_rng(rng.next_u64());

  std::vector<std::vector<double>> probs_cache(
      static_cast<std::size_t>(policy_t.n_contexts()));
  auto probs_of = [&](int c) -> const std::vector<double>& {
    auto& row = probs_cache[static_cast<std::size_t>(c)];
    if (row.empty()) row = policy_t.softmax_probs(c);
    return row;
  };

  auto draw_self_play = [&](int c, int chosen, const std::vector<int>& taken) -> int {
    const auto& probs = probs_of(c);
    for (int attempt = 0; attempt < 100; ++attempt) {
      const int y = sp_rng.categorical(probs);
      if (y == chosen) continue;
      if (std::find(taken.begin(), taken.end(), y) != taken.end()) continue;
      return y;
    }
    // Ranked fallback: most probable item not yet used.
    for (int y : policy_t.top_k_items(c, n)) {
      if (y == chosen) continue;
      if (std::find(taken.begin(), taken.end(), y) != taken.end()) continue;
      return y;
    }
    throw std::invalid_argument("build_preference_triples: no valid negative");
  };

  std::vector<PreferenceTriple> out;
  out.reserve(interactions.records.size());
  for (auto [c, y_w] : interactions.records) {
    PreferenceTriple t;
    t.context = c;
    t.chosen = y_w;
    t.source = cfg.neg_strategy;
    switch (cfg.neg_strategy) {
      case NegSource::uniform:
        for (int j = 0; j < cfg.n_negatives; ++j)
          t.rejected.push_back(draw_uniform_negative(uni_rng, n, y_w, t.rejected));
        break;
      case NegSource::self_play:
        for (int j = 0; j < cfg.n_negatives; ++j)
          t.rejected.push_back(draw_self_play(c, y_w, t.rejected));
        break;
      case NegSource::beam:
        t.rejected = policy_t.beam_negatives(c, cfg.n_negatives, y_w);
        break;
      case NegSource::mixed:
        for (int j = 0; j < cfg.n_negatives; ++j) {
          const int candidate = draw_self_play(c, y_w, t.rejected);
          if (coin_rng.next_double() < cfg.contamination)
            t.rejected.push_back(draw_uniform_negative(uni_rng, n, y_w, t.rejected));
          else
            t.rejected.push_back(candidate);
        }
        break;
    }
    out.push_back(std::move(t));
  }
  return out;
}

InteractionSet subsample_interactions(const InteractionSet& interactions,
                                      const ItemCatalog& catalog, double fraction,
                                      std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw std::invalid_argument("subsample_interactions: fraction must be in (0, 1]");
  if (fraction == 1.0) return interactions;
  const std::size_t m = interactions.records.size();
  auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(m)));
  k = std::max<std::size_t>(1, std::min(k, m));

  std::vector<int> idx(m);
  for (std::size_t i = 0; i < m; ++i) idx[i] = static_cast<int>(i);
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());

  std::vector<std::pair<int, int>> records;
  records.reserve(k);
  for (int i : idx) records.push_back(interactions.records[static_cast<std::size_t>(i)]);
  return make_interactions(std::move(records), catalog);
}

Policy sft_step(Policy policy, const InteractionSet& interactions, const TrainConfig& cfg) {
  if (interactions.records.empty())
    throw std::invalid_argument("sft_step: empty interaction set");
  for (int epoch = 0; epoch < cfg.sft_epochs; ++epoch) {
    LossValue loss = sft_loss(policy, interactions);
    if (!std::isfinite(loss.value)) throw divergence_error("sft_step: non-finite loss");
    apply_step(policy, loss.grad, cfg.lr_sft, "sft_step");
  }
  return policy;
}

Policy dpo_step(Policy policy, const Policy& ref_snapshot,
                std::span<const PreferenceTriple> triples, const TrainConfig& cfg) {
  if (triples.empty()) throw std::invalid_argument("dpo_step: empty triple set");
  for (int epoch = 0; epoch < cfg.dpo_epochs; ++epoch) {
    LossValue loss = dpo_batch_loss(policy, ref_snapshot, triples, cfg.beta);
    if (!std::isfinite(loss.value)) throw divergence_error("dpo_step: non-finite loss");
    apply_step(policy, loss.grad, cfg.lr_dpo, "dpo_step");
  }
  return policy;
}

namespace {

void record(Trajectory& traj, int iteration, Phase phase, const Policy& policy,
            const Evaluator& evaluator) {
  traj.snapshots.push_back({iteration, phase, policy});
  if (evaluator) traj.metrics.push_back(evaluator(policy, iteration, phase));
}

}  // namespace

Trajectory self_play_run(const Policy& init_policy, const InteractionSet& interactions,
                         const ItemCatalog& catalog, const TrainConfig& cfg,
                         const Evaluator& evaluator) {
  validate(cfg);
  if (interactions.records.empty())
    throw std::invalid_argument("self_play_run: empty interaction set");

  Trajectory traj;
  Policy current = init_policy;
  record(traj, 0, Phase::init, current, evaluator);

  for (int t = 1; t <= cfg.iterations; ++t) {
    const InteractionSet sub = subsample_interactions(
        interactions, catalog, cfg.subsample_fraction,
        derive_seed(cfg.seed, kStreamSubsample, static_cast<std::uint64_t>(t)));

    Rng triple_rng(derive_seed(cfg.seed, kStreamTriples, static_cast<std::uint64_t>(t)));
    const auto triples = build_preference_triples(current, sub, cfg, triple_rng);

    Policy post_sft = sft_step(std::move(current), sub, cfg);
    record(traj, t, Phase::post_sft, post_sft, evaluator);

    const Policy& ref = cfg.ref_is_post_sft ? post_sft : traj.snapshots[traj.snapshots.size() - 2].policy;
    Policy post_dpo = dpo_step(post_sft, ref, triples, cfg);
    record(traj, t, Phase::post_dpo, post_dpo, evaluator);

    current = std::move(post_dpo);
  }
  return traj;
}

Trajectory dpo_baseline_run(const Policy& init_policy, const InteractionSet& interactions,
                            const ItemCatalog& catalog, const TrainConfig& cfg,
                            const Evaluator& evaluator) {
  TrainConfig baseline = cfg;
  baseline.iterations = 1;
  baseline.neg_strategy = NegSource::uniform;
  return self_play_run(init_policy, interactions, catalog, baseline, evaluator);
}

Trajectory sft_only_run(const Policy& init_policy, const InteractionSet& interactions,
                        const ItemCatalog& catalog, const TrainConfig& cfg,
                        const Evaluator& evaluator) {
  validate(cfg);
  const InteractionSet sub = subsample_interactions(
      interactions, catalog, cfg.subsample_fraction,
      derive_seed(cfg.seed, kStreamSubsample, 1));
  Trajectory traj;
  record(traj, 0, Phase::init, init_policy, evaluator);
  Policy post_sft = sft_step(init_policy, sub, cfg);
  record(traj, 1, Phase::post_sft, post_sft, evaluator);
  return traj;
}

}  // namespace reclab

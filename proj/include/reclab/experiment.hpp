#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "reclab/catalog.hpp"
#include "reclab/metrics.hpp"
#include "reclab/policy.hpp"
#include "reclab/training.hpp"

namespace reclab {

enum class ArmKind { sft_only, dpo_baseline, self_play };
std::string to_string(ArmKind k);
ArmKind arm_kind_from_string(const std::string& s);

struct ArmSpec {
  std::string name;
  ArmKind kind = ArmKind::self_play;
  TrainConfig config;
};

struct EvalConfig {
  int val_samples = 512;
  // Decoding temperature for generated recommendations: softmax(logits / T).
  // T < 1 mimics sharpened decoding, T = 1 plain sampling.
  double decode_temperature = 1.0;
  int top_k = 5;    // HR@K / NDCG@K cutoff
  int or_top_m = 3; // over-recommendation head size
};

struct CatalogSpec {
  int n_items = 100;
  int n_categories = 10;
  int n_contexts = 1;
  int n_groups = 5;
  double zipf_exponent = 1.2;
  bool correlated_categories = false;
};

struct ExperimentSpec {
  std::string name;
  CatalogSpec catalog;
  EvalConfig eval;
  int train_samples = 4096;
  std::vector<ArmSpec> arms;
  int replications = 1;
  std::uint64_t master_seed = 1;
  // Preset that runs the closed-form verifiers instead of training arms.
  bool theorem_verification = false;
};

void validate(const ExperimentSpec& spec);

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentSpec& spec);
ExperimentSpec experiment_from_json(const nlohmann::json& j);

// One generated recommendation per validation positive, drawn from the
// temperature-adjusted policy; the rank field is the ground truth's position
// in the policy's full-space ranking.
RecommendationLog make_recommendation_log(const Policy& policy, const ItemCatalog& catalog,
                                          const InteractionSet& validation,
                                          double decode_temperature, Rng& rng);

MetricsReport evaluate_policy(const Policy& policy, const ItemCatalog& catalog,
                              const InteractionSet& validation,
                              std::span<const double> hist_category_dist,
                              const EvalConfig& eval, Rng& rng);

// Builds the catalog, runs every arm x replication on a worker pool, and
// writes catalog.json, config.json, metrics.csv, summary.json and per-rep
// checkpoints under output_dir. Partial outputs are removed on failure.
void run_experiment(const ExperimentSpec& spec, const std::string& output_dir);

// Built-in presets: fig1, verify-theorem, ablation-negatives, rho-sweep,
// nneg-sweep.
ExperimentSpec make_preset(const std::string& name, std::uint64_t master_seed);
std::vector<std::string> preset_names();

// Closed-form verification grid (optimal-policy and reward oracles); the
// returned report carries per-instance TV distances, gradient norms and
// pass/fail flags.
nlohmann::json run_theory_verification(std::uint64_t seed, bool* all_pass);

// Worker count for arm dispatch: RECLAB_WORKERS env var, else hardware.
int worker_count(std::size_t jobs);

}  // namespace reclab

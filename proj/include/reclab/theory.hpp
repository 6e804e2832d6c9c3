#pragma once

#include <span>
#include <vector>

#include "reclab/policy.hpp"

namespace reclab {

// Closed-form optimum of the exact pairwise objective:
//   pi*(y) proportional to ref(y) * (p(y)/q(y))^(1/beta),
// computed in the log domain. Requires q(y) > 0 wherever p(y) > 0.
std::vector<double> closed_form_optimal_policy(std::span<const double> ref,
                                               std::span<const double> p,
                                               std::span<const double> q, double beta);

// Closed-form Bradley-Terry optimum r*(y) = log p(y) - log q(y), centered to
// zero mean to fix the additive constant. Requires strictly positive inputs.
std::vector<double> closed_form_optimal_reward(std::span<const double> p,
                                               std::span<const double> q);

struct OptConfig {
  double lr = 0.5;
  int max_iters = 200000;
  double tol = 1e-8;  // gradient infinity-norm
};

struct OptResult {
  Policy policy;  // single-context, rows centered
  bool converged = false;
  int iters = 0;
  double grad_inf_norm = 0.0;
  double final_loss = 0.0;
};

// Gradient descent on the exact pairwise objective (weight == 1) over logits,
// from uniform init, with learning-rate halving on loss increase. Verifies
// the closed form numerically.
OptResult exact_dpo_optimize(std::span<const double> ref, std::span<const double> p,
                             std::span<const double> q, double beta,
                             const OptConfig& cfg = {});

// Log-reward floor for items with zero popularity, whose exact optimum is
// unbounded below.
inline constexpr double kRewardFloor = -40.0;

struct RewardOptResult {
  std::vector<double> reward;  // centered log-rewards
  bool converged = false;
  int iters = 0;
  double grad_inf_norm = 0.0;
  std::vector<int> floored_items;  // clamped at kRewardFloor
};

// Gradient ascent on the exact pairwise preference objective over
// log-rewards; matches closed_form_optimal_reward on strictly positive
// instances.
RewardOptResult exact_bt_reward_optimize(std::span<const double> p,
                                         std::span<const double> q,
                                         const OptConfig& cfg = {});

struct SharpeningPoint {
  double beta = 0.0;
  double top1_mass = 0.0;
  double entropy = 0.0;
};

// Evaluates the closed-form policy across betas (sorted descending) and
// reports peak mass and Shannon entropy per point.
std::vector<SharpeningPoint> beta_sharpening_curve(std::span<const double> ref,
                                                   std::span<const double> p,
                                                   std::span<const double> q,
                                                   std::span<const double> betas);

}  // namespace reclab

#include "reclab/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "reclab/errors.hpp"
#include "reclab/losses.hpp"
#include "reclab/numeric.hpp"

namespace reclab {

namespace {

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

void center(std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  for (double& x : v) x -= mean;
}

// Step growth on successful descent steps; halving on increase is the
// counterpart. Plain constant-step descent stalls above the 1e-8 gradient
// tolerance on the flat small-beta instances.
constexpr double kLrGrowth = 1.2;

// Fused value+gradient of sum_{w,l} p(w) qw(l) softplus(-beta (s_w - s_l)),
// allocation-free; one exp per pair. Matches enumerated_pair_loss and is
// tested against it.
double fused_pair_eval(std::span<const double> score, std::span<const double> p,
                       std::span<const double> qw, double beta, std::span<double> grad) {
  const std::size_t n = score.size();
  std::fill(grad.begin(), grad.end(), 0.0);
  double value = 0.0;
  for (std::size_t w = 0; w < n; ++w) {
    if (p[w] == 0.0) continue;
    const double sw = score[w];
    double row_k = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
      if (qw[l] == 0.0) continue;
      const double c = p[w] * qw[l];
      const double h = beta * (sw - score[l]);
      double sp, sg;  // softplus(-h), sigmoid(-h)
      if (h >= 0.0) {
        const double e = std::exp(-h);
        sp = std::log1p(e);
        sg = e / (1.0 + e);
      } else {
        const double e = std::exp(h);
        sp = -h + std::log1p(e);
        sg = 1.0 / (1.0 + e);
      }
      value += c * sp;
      const double k = c * beta * sg;
      row_k += k;
      grad[l] += k;
    }
    grad[w] -= row_k;
  }
  return value;
}

}  // namespace

std::vector<double> closed_form_optimal_policy(std::span<const double> ref,
                                               std::span<const double> p,
                                               std::span<const double> q, double beta) {
  const std::size_t n = ref.size();
  if (p.size() != n || q.size() != n)
    throw std::invalid_argument("closed_form_optimal_policy: size mismatch");
  if (!(beta > 0.0)) throw std::invalid_argument("closed_form_optimal_policy: beta must be > 0");
  // Only ratios matter: p and q (and ref) may be unnormalized nonnegative
  // weights; the result is normalized either way.
  auto check_weights = [n](std::span<const double> w, const char* what) {
    double total = 0.0;
    for (double x : w) {
      if (!(x >= 0.0)) throw std::invalid_argument(std::string(what) + ": negative entry");
      total += x;
    }
    if (!(total > 0.0)) throw std::invalid_argument(std::string(what) + ": no mass");
  };
  check_weights(ref, "closed_form ref");
  check_weights(p, "closed_form p");
  check_weights(q, "closed_form q");

  std::vector<double> log_unnorm(n);
  for (std::size_t y = 0; y < n; ++y) {
    if (p[y] > 0.0 && q[y] == 0.0)
      throw std::invalid_argument("closed_form_optimal_policy: q is zero where p is positive");
    if (ref[y] == 0.0 || p[y] == 0.0) {
      log_unnorm[y] = kNegInf;
      continue;
    }
    log_unnorm[y] = safe_log(ref[y]) + (std::log(p[y]) - std::log(q[y])) / beta;
  }
  return softmax(log_unnorm);
}

std::vector<double> closed_form_optimal_reward(std::span<const double> p,
                                               std::span<const double> q) {
  const std::size_t n = p.size();
  if (q.size() != n)
    throw std::invalid_argument("closed_form_optimal_reward: size mismatch");
  std::vector<double> r(n);
  for (std::size_t y = 0; y < n; ++y) {
    if (!(p[y] > 0.0) || !(q[y] > 0.0))
      throw std::invalid_argument("closed_form_optimal_reward: inputs must be strictly positive");
    r[y] = std::log(p[y]) - std::log(q[y]);
  }
  center(r);
  return r;
}

OptResult exact_dpo_optimize(std::span<const double> ref, std::span<const double> p,
                             std::span<const double> q, double beta,
                             const OptConfig& cfg) {
  const std::size_t n = ref.size();
  if (p.size() != n || q.size() != n)
    throw std::invalid_argument("exact_dpo_optimize: size mismatch");
  check_distribution(ref, "exact_dpo_optimize ref");
  for (double r : ref)
    if (!(r > 0.0))
      throw std::invalid_argument("exact_dpo_optimize: ref must be strictly positive");

  std::vector<double> log_ref(n);
  for (std::size_t y = 0; y < n; ++y) log_ref[y] = std::log(ref[y]);

  std::vector<double> z(n, 0.0), z_new(n), grad(n), grad_new(n), score(n);
  auto eval = [&](const std::vector<double>& logits, std::span<double> g) {
    double mx = logits[0];
    for (double x : logits) mx = std::max(mx, x);
    double s = 0.0;
    for (double x : logits) s += std::exp(x - mx);
    const double lse = mx + std::log(s);
    for (std::size_t y = 0; y < n; ++y) score[y] = logits[y] - lse - log_ref[y];
    return fused_pair_eval(score, p, q, beta, g);
  };

  double cur = eval(z, grad);
  double lr = cfg.lr;
  OptResult out;
  int iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    out.grad_inf_norm = max_abs(grad);
    if (out.grad_inf_norm < cfg.tol) {
      out.converged = true;
      break;
    }
    for (std::size_t y = 0; y < n; ++y) z_new[y] = z[y] - lr * grad[y];
    const double next = eval(z_new, grad_new);
    if (!std::isfinite(next))
      throw divergence_error("exact_dpo_optimize: non-finite loss");
    if (next > cur) {
      lr *= 0.5;  // keep the current point, retry smaller
      continue;
    }
    std::swap(z, z_new);
    std::swap(grad, grad_new);
    cur = next;
    lr *= kLrGrowth;
  }
  out.iters = iter;
  out.final_loss = cur;
  out.policy = Policy(1, static_cast<int>(n));
  auto row = out.policy.logits_row(0);
  std::copy(z.begin(), z.end(), row.begin());
  out.policy.center_rows();
  return out;
}

RewardOptResult exact_bt_reward_optimize(std::span<const double> p,
                                         std::span<const double> q,
                                         const OptConfig& cfg) {
  const std::size_t n = p.size();
  if (q.size() != n)
    throw std::invalid_argument("exact_bt_reward_optimize: size mismatch");
  check_distribution(p, "exact_bt_reward_optimize p");
  check_distribution(q, "exact_bt_reward_optimize q");

  // Maximizing sum p(w) q(l) log sigma(rho_w - rho_l) is minimizing the
  // enumeration kernel with score = rho, weight == 1, beta = 1.
  std::vector<double> rho(n, 0.0), rho_new(n), grad(n), grad_new(n);
  std::vector<char> floored(n, 0);

  // Items with zero popularity but nonzero negative-sampling mass have a
  // strictly negative objective gradient at every finite log-reward, so the
  // optimum is unbounded below; pin them at the floor from the start.
  for (std::size_t y = 0; y < n; ++y) {
    if (p[y] == 0.0 && q[y] > 0.0) {
      rho[y] = kRewardFloor;
      floored[y] = 1;
    }
  }

  auto clamp_floor = [&](std::vector<double>& r) {
    for (std::size_t y = 0; y < n; ++y) {
      if (r[y] < kRewardFloor) {
        r[y] = kRewardFloor;
        floored[y] = 1;
      }
    }
  };

  double cur = fused_pair_eval(rho, p, q, 1.0, grad);
  double lr = cfg.lr;
  RewardOptResult out;
  int iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    // Coordinates pinned at the floor with gradients still pushing down do
    // not block convergence.
    double gnorm = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      if (floored[y] && rho[y] == kRewardFloor && grad[y] > 0.0) continue;
      gnorm = std::max(gnorm, std::abs(grad[y]));
    }
    out.grad_inf_norm = gnorm;
    if (gnorm < cfg.tol) {
      out.converged = true;
      break;
    }
    for (std::size_t y = 0; y < n; ++y) rho_new[y] = rho[y] - lr * grad[y];
    clamp_floor(rho_new);
    const double next = fused_pair_eval(rho_new, p, q, 1.0, grad_new);
    if (!std::isfinite(next))
      throw divergence_error("exact_bt_reward_optimize: non-finite objective");
    if (next > cur) {
      lr *= 0.5;
      continue;
    }
    std::swap(rho, rho_new);
    std::swap(grad, grad_new);
    cur = next;
    lr *= kLrGrowth;
  }
  out.iters = iter;
  for (std::size_t y = 0; y < n; ++y)
    if (floored[y] && rho[y] == kRewardFloor)
      out.floored_items.push_back(static_cast<int>(y));
  center(rho);
  out.reward = std::move(rho);
  return out;
}

std::vector<SharpeningPoint> beta_sharpening_curve(std::span<const double> ref,
                                                   std::span<const double> p,
                                                   std::span<const double> q,
                                                   std::span<const double> betas) {
  if (betas.empty()) throw std::invalid_argument("beta_sharpening_curve: empty betas");
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] > 0.0))
      throw std::invalid_argument("beta_sharpening_curve: betas must be > 0");
    if (i > 0 && betas[i] >= betas[i - 1])
      throw std::invalid_argument("beta_sharpening_curve: betas must be sorted descending");
  }
  std::vector<SharpeningPoint> curve;
  curve.reserve(betas.size());
  for (double beta : betas) {
    const auto pi = closed_form_optimal_policy(ref, p, q, beta);
    SharpeningPoint pt;
    pt.beta = beta;
    pt.top1_mass = *std::max_element(pi.begin(), pi.end());
    pt.entropy = entropy(pi);
    curve.push_back(pt);
  }
  return curve;
}

}  // namespace reclab

#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace reclab {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// 1 / (1 + e^{-x}) without overflow.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

// Max-subtracted log(sum(exp(v))). -inf entries carry zero weight.
inline double logsumexp(std::span<const double> v) {
  double mx = kNegInf;
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

inline std::vector<double> log_softmax(std::span<const double> logits) {
  const double lse = logsumexp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  auto lp = log_softmax(logits);
  for (double& x : lp) x = std::exp(x);
  return lp;
}

// Shannon entropy in nats; 0 log 0 = 0.
inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

inline void check_distribution(std::span<const double> p, const char* what,
                               double tol = 1e-9) {
  double s = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) throw std::invalid_argument(std::string(what) + ": negative entry");
    s += x;
  }
  if (std::abs(s - 1.0) > tol)
    throw std::invalid_argument(std::string(what) + ": does not sum to 1");
}

}  // namespace reclab

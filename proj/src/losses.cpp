#include "reclab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "reclab/numeric.hpp"
#include "reclab/parallel.hpp"

namespace reclab {

namespace {

// Fixed row block for the O(n^2) enumeration; results are independent of the
// thread count.
constexpr std::size_t kRowBlock = 16;

void check_beta(double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
}

// Log-probability rows for both policies, computed once per context used.
struct LogProbCache {
  const Policy& policy;
  const Policy& ref;
  std::vector<std::vector<double>> lp, lpref;
  std::vector<char> ready;

  LogProbCache(const Policy& pol, const Policy& r)
      : policy(pol), ref(r),
        lp(static_cast<std::size_t>(pol.n_contexts())),
        lpref(static_cast<std::size_t>(pol.n_contexts())),
        ready(static_cast<std::size_t>(pol.n_contexts()), 0) {}

  void ensure(int c) {
    auto i = static_cast<std::size_t>(c);
    if (!ready[i]) {
      lp[i] = policy.log_probs(c);
      lpref[i] = ref.log_probs(c);
      ready[i] = 1;
    }
  }
};

// Adds one triple's mean-over-rejected pair terms; returns the value term.
double accumulate_triple(const PreferenceTriple& t, const std::vector<double>& lp,
                         const std::vector<double>& lpref, double beta, double scale,
                         double* grad_row) {
  const auto w = static_cast<std::size_t>(t.chosen);
  const double sw = lp[w] - lpref[w];
  const double inv_n = 1.0 / static_cast<double>(t.rejected.size());
  double value = 0.0;
  for (int l : t.rejected) {
    const auto li = static_cast<std::size_t>(l);
    const double h = beta * (sw - (lp[li] - lpref[li]));
    value += softplus(-h) * inv_n;
    const double k = beta * sigmoid(-h) * inv_n * scale;
    grad_row[w] -= k;
    grad_row[li] += k;
  }
  return value;
}

}  // namespace

void validate_triple(const PreferenceTriple& t, int n_contexts, int n_items) {
  if (t.context < 0 || t.context >= n_contexts)
    throw std::invalid_argument("PreferenceTriple: context out of range");
  if (t.chosen < 0 || t.chosen >= n_items)
    throw std::invalid_argument("PreferenceTriple: chosen item out of range");
  if (t.rejected.empty())
    throw std::invalid_argument("PreferenceTriple: rejected list is empty");
  for (std::size_t i = 0; i < t.rejected.size(); ++i) {
    const int l = t.rejected[i];
    if (l < 0 || l >= n_items)
      throw std::invalid_argument("PreferenceTriple: rejected item out of range");
    if (l == t.chosen)
      throw std::invalid_argument("PreferenceTriple: chosen item appears in rejected list");
  }
  if (t.rejected.size() > 1) {
    // Negative lists are short; a quadratic scan beats hashing here.
    if (t.rejected.size() <= 16) {
      for (std::size_t i = 0; i < t.rejected.size(); ++i)
        for (std::size_t j = i + 1; j < t.rejected.size(); ++j)
          if (t.rejected[i] == t.rejected[j])
            throw std::invalid_argument("PreferenceTriple: duplicate rejected item");
    } else {
      std::unordered_set<int> seen;
      for (int l : t.rejected)
        if (!seen.insert(l).second)
          throw std::invalid_argument("PreferenceTriple: duplicate rejected item");
    }
  }
}

std::string to_string(NegSource s) {
  switch (s) {
    case NegSource::uniform: return "uniform";
    case NegSource::self_play: return "self_play";
    case NegSource::beam: return "beam";
    case NegSource::mixed: return "mixed";
  }
  return "uniform";
}

NegSource neg_source_from_string(const std::string& s) {
  if (s == "uniform") return NegSource::uniform;
  if (s == "self_play") return NegSource::self_play;
  if (s == "beam") return NegSource::beam;
  if (s == "mixed") return NegSource::mixed;
  throw std::invalid_argument("unknown negative strategy: " + s);
}

LossValue sft_loss(const Policy& policy, const InteractionSet& interactions) {
  if (interactions.records.empty())
    throw std::invalid_argument("sft_loss: empty interaction set");
  const int C = policy.n_contexts();
  const int n = policy.n_items();
  const double M = static_cast<double>(interactions.records.size());

  LossValue out;
  out.grad.assign(static_cast<std::size_t>(C) * static_cast<std::size_t>(n), 0.0);
  double value = 0.0;
  for (int c = 0; c < C; ++c) {
    const auto& cnt = interactions.counts[static_cast<std::size_t>(c)];
    long long mc = 0;
    for (long long x : cnt) mc += x;
    if (mc == 0) continue;
    const auto lp = policy.log_probs(c);
    const auto probs = softmax(policy.logits_row(c));
    double* grow = out.grad.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(n);
    for (int y = 0; y < n; ++y) {
      const auto yi = static_cast<std::size_t>(y);
      if (cnt[yi] > 0) value -= static_cast<double>(cnt[yi]) * lp[yi];
      grow[yi] = (static_cast<double>(mc) * probs[yi] - static_cast<double>(cnt[yi])) / M;
    }
  }
  out.value = value / M;
  return out;
}

LossValue sft_exact_loss(const Policy& policy, std::span<const double> target,
                         int context) {
  if (static_cast<int>(target.size()) != policy.n_items())
    throw std::invalid_argument("sft_exact_loss: target size mismatch");
  check_distribution(target, "sft_exact_loss target");
  const int C = policy.n_contexts();
  const int n = policy.n_items();
  LossValue out;
  out.grad.assign(static_cast<std::size_t>(C) * static_cast<std::size_t>(n), 0.0);
  const auto lp = policy.log_probs(context);
  const auto probs = softmax(policy.logits_row(context));
  double* grow = out.grad.data() + static_cast<std::size_t>(context) * static_cast<std::size_t>(n);
  for (int y = 0; y < n; ++y) {
    const auto yi = static_cast<std::size_t>(y);
    if (target[yi] > 0.0) out.value -= target[yi] * lp[yi];
    grow[yi] = probs[yi] - target[yi];
  }
  return out;
}

double forward_kl(std::span<const double> p, const Policy& policy, int context) {
  if (static_cast<int>(p.size()) != policy.n_items())
    throw std::invalid_argument("forward_kl: p size mismatch");
  check_distribution(p, "forward_kl p");
  const auto lp = policy.log_probs(context);
  double kl = 0.0;
  for (std::size_t y = 0; y < p.size(); ++y) {
    if (p[y] <= 0.0) continue;
    if (lp[y] == kNegInf) return std::numeric_limits<double>::infinity();
    kl += p[y] * (std::log(p[y]) - lp[y]);
  }
  return kl;
}

LossValue dpo_pair_loss(const Policy& policy, const Policy& ref,
                        const PreferenceTriple& triple, double beta) {
  if (triple.rejected.size() != 1)
    throw std::invalid_argument("dpo_pair_loss: exactly one rejected item required");
  return multi_negative_dpo_loss(policy, ref, triple, beta);
}

LossValue multi_negative_dpo_loss(const Policy& policy, const Policy& ref,
                                  const PreferenceTriple& triple, double beta) {
  check_beta(beta);
  validate_triple(triple, policy.n_contexts(), policy.n_items());
  const int C = policy.n_contexts();
  const int n = policy.n_items();
  LossValue out;
  out.grad.assign(static_cast<std::size_t>(C) * static_cast<std::size_t>(n), 0.0);
  const auto lp = policy.log_probs(triple.context);
  const auto lpref = ref.log_probs(triple.context);
  double* grow = out.grad.data() +
                 static_cast<std::size_t>(triple.context) * static_cast<std::size_t>(n);
  out.value = accumulate_triple(triple, lp, lpref, beta, 1.0, grow);
  return out;
}

LossValue dpo_batch_loss(const Policy& policy, const Policy& ref,
                         std::span<const PreferenceTriple> triples, double beta) {
  check_beta(beta);
  if (triples.empty()) throw std::invalid_argument("dpo_batch_loss: empty batch");
  const int C = policy.n_contexts();
  const int n = policy.n_items();
  for (const auto& t : triples) validate_triple(t, C, n);

  LogProbCache cache(policy, ref);
  for (const auto& t : triples) cache.ensure(t.context);

  const double M = static_cast<double>(triples.size());
  const std::size_t dim = static_cast<std::size_t>(C) * static_cast<std::size_t>(n);

  // One fused pass: per-block partials hold the gradient plus the value sum
  // in an extra trailing slot.
  auto acc = block_accumulate(triples.size(), dim + 1, [&](std::size_t i, double* a) {
    const auto& t = triples[i];
    const auto ci = static_cast<std::size_t>(t.context);
    a[dim] += accumulate_triple(t, cache.lp[ci], cache.lpref[ci], beta, 1.0 / M,
                                a + ci * static_cast<std::size_t>(n));
  });
  LossValue out;
  out.value = acc[dim] / M;
  acc.resize(dim);
  out.grad = std::move(acc);
  return out;
}

namespace {

void check_enumeration_inputs(std::span<const double> score, std::span<const double> p,
                              std::span<const double> q, std::span<const double> weight) {
  const std::size_t n = score.size();
  if (p.size() != n || q.size() != n || weight.size() != n)
    throw std::invalid_argument("enumerated_pair_loss: size mismatch");
  check_distribution(p, "enumerated_pair_loss p");
  check_distribution(q, "enumerated_pair_loss q");
  for (std::size_t y = 0; y < n; ++y) {
    if (weight[y] < 0.0)
      throw std::invalid_argument("enumerated_pair_loss: negative weight");
    if (weight[y] > 0.0 && q[y] == 0.0)
      throw std::invalid_argument("enumerated_pair_loss: weight positive where q is zero");
  }
}

}  // namespace

RowLoss enumerated_pair_loss(std::span<const double> score, std::span<const double> p,
                             std::span<const double> q, std::span<const double> weight,
                             double beta) {
  check_beta(beta);
  check_enumeration_inputs(score, p, q, weight);
  const std::size_t n = score.size();

  // qw[l] = q(l) * weight(l); pair coefficient c = p(w) * qw[l].
  std::vector<double> qw(n);
  for (std::size_t l = 0; l < n; ++l) qw[l] = q[l] * weight[l];

  const std::size_t nblocks = (n + kRowBlock - 1) / kRowBlock;
  std::vector<double> val_partial(nblocks, 0.0);
  std::vector<double> row_k(n, 0.0);  // row w: sum_l of k(w,l), owned per row
  std::vector<std::vector<double>> col_partial(nblocks);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nblocks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kRowBlock;
    const std::size_t hi = std::min(n, lo + kRowBlock);
    std::vector<double> col(n, 0.0);  // sum over this block's w of k(w,l)
    double val = 0.0;
    for (std::size_t w = lo; w < hi; ++w) {
      if (p[w] == 0.0) continue;
      const double sw = score[w];
      double rk = 0.0;
      for (std::size_t l = 0; l < n; ++l) {
        if (qw[l] == 0.0) continue;
        const double c = p[w] * qw[l];
        const double h = beta * (sw - score[l]);
        val += c * softplus(-h);
        const double k = c * beta * sigmoid(-h);
        rk += k;
        col[l] += k;
      }
      row_k[w] = rk;
    }
    val_partial[static_cast<std::size_t>(b)] = val;
    col_partial[static_cast<std::size_t>(b)] = std::move(col);
  }

  RowLoss out;
  out.value = pairwise_fold(val_partial);
  out.grad.assign(n, 0.0);
  std::size_t m = nblocks;
  while (m > 1) {
    const std::size_t half = m / 2;
    for (std::size_t i = 0; i < half; ++i) {
      auto& a = col_partial[2 * i];
      const auto& bv = col_partial[2 * i + 1];
      for (std::size_t j = 0; j < n; ++j) a[j] += bv[j];
      if (i != 2 * i) col_partial[i] = std::move(a);
    }
    if (m % 2 == 1) {
      col_partial[half] = std::move(col_partial[m - 1]);
      m = half + 1;
    } else {
      m = half;
    }
  }
  const auto& col = col_partial[0];
  for (std::size_t j = 0; j < n; ++j) out.grad[j] = col[j] - row_k[j];
  return out;
}

LossValue exact_weighted_dpo_loss(const Policy& policy, const Policy& ref,
                                  std::span<const double> p, std::span<const double> q,
                                  std::span<const double> weight, double beta,
                                  int context) {
  const int C = policy.n_contexts();
  const int n = policy.n_items();
  if (static_cast<int>(p.size()) != n)
    throw std::invalid_argument("exact_weighted_dpo_loss: p size mismatch");
  const auto lp = policy.log_probs(context);
  const auto lpref = ref.log_probs(context);
  std::vector<double> score(static_cast<std::size_t>(n));
  for (int y = 0; y < n; ++y)
    score[static_cast<std::size_t>(y)] = lp[static_cast<std::size_t>(y)] -
                                         lpref[static_cast<std::size_t>(y)];
  RowLoss row = enumerated_pair_loss(score, p, q, weight, beta);
  LossValue out;
  out.value = row.value;
  out.grad.assign(static_cast<std::size_t>(C) * static_cast<std::size_t>(n), 0.0);
  std::copy(row.grad.begin(), row.grad.end(),
            out.grad.begin() + static_cast<std::size_t>(context) * static_cast<std::size_t>(n));
  return out;
}

namespace serial {

RowLoss enumerated_pair_loss(std::span<const double> score, std::span<const double> p,
                             std::span<const double> q, std::span<const double> weight,
                             double beta) {
  check_beta(beta);
  check_enumeration_inputs(score, p, q, weight);
  const std::size_t n = score.size();
  RowLoss out;
  out.grad.assign(n, 0.0);
  for (std::size_t w = 0; w < n; ++w) {
    if (p[w] == 0.0) continue;
    for (std::size_t l = 0; l < n; ++l) {
      const double c = p[w] * q[l] * weight[l];
      if (c == 0.0) continue;
      const double h = beta * (score[w] - score[l]);
      out.value += c * softplus(-h);
      const double k = c * beta * sigmoid(-h);
      out.grad[w] -= k;
      out.grad[l] += k;
    }
  }
  return out;
}

LossValue dpo_batch_loss(const Policy& policy, const Policy& ref,
                         std::span<const PreferenceTriple> triples, double beta) {
  check_beta(beta);
  if (triples.empty()) throw std::invalid_argument("dpo_batch_loss: empty batch");
  const int C = policy.n_contexts();
  const int n = policy.n_items();
  for (const auto& t : triples) validate_triple(t, C, n);
  LogProbCache cache(policy, ref);
  for (const auto& t : triples) cache.ensure(t.context);
  const double M = static_cast<double>(triples.size());
  LossValue out;
  out.grad.assign(static_cast<std::size_t>(C) * static_cast<std::size_t>(n), 0.0);
  for (const auto& t : triples) {
    const auto ci = static_cast<std::size_t>(t.context);
    out.value += accumulate_triple(t, cache.lp[ci], cache.lpref[ci], beta, 1.0 / M,
                                   out.grad.data() + ci * static_cast<std::size_t>(n));
  }
  out.value /= M;
  return out;
}

LossValue sft_loss(const Policy& policy, const InteractionSet& interactions) {
  if (interactions.records.empty())
    throw std::invalid_argument("sft_loss: empty interaction set");
  const int C = policy.n_contexts();
  const int n = policy.n_items();
  const double M = static_cast<double>(interactions.records.size());
  LossValue out;
  out.grad.assign(static_cast<std::size_t>(C) * static_cast<std::size_t>(n), 0.0);
  std::vector<std::vector<double>> lp(static_cast<std::size_t>(C));
  std::vector<std::vector<double>> probs(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c) {
    lp[static_cast<std::size_t>(c)] = policy.log_probs(c);
    probs[static_cast<std::size_t>(c)] = policy.softmax_probs(c);
  }
  // Record-order mean; the grouped formula in the parallel path matches it.
  for (auto [c, y] : interactions.records) {
    const auto ci = static_cast<std::size_t>(c);
    out.value -= lp[ci][static_cast<std::size_t>(y)];
    double* grow = out.grad.data() + ci * static_cast<std::size_t>(n);
    for (int j = 0; j < n; ++j) grow[static_cast<std::size_t>(j)] += probs[ci][static_cast<std::size_t>(j)] / M;
    grow[static_cast<std::size_t>(y)] -= 1.0 / M;
  }
  out.value /= M;
  return out;
}

}  // namespace serial

}  // namespace reclab

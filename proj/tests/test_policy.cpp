#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "reclab/policy.hpp"
#include "reclab/rng.hpp"

using namespace reclab;

namespace {

Policy policy_from_logits(const std::vector<double>& logits) {
  Policy p(1, static_cast<int>(logits.size()));
  auto row = p.logits_row(0);
  std::copy(logits.begin(), logits.end(), row.begin());
  return p;
}

}  // namespace

TEST_CASE("softmax of zero logits is uniform") {
  const Policy p(1, 3);
  for (double x : p.softmax_probs(0)) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("softmax closed form for [ln 2, 0]") {
  const auto p = policy_from_logits({std::log(2.0), 0.0});
  const auto probs = p.softmax_probs(0);
  CHECK(probs[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(probs[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("softmax does not overflow on extreme logits") {
  const auto p = policy_from_logits({1000.0, 0.0});
  const auto probs = p.softmax_probs(0);
  CHECK(std::isfinite(probs[0]));
  CHECK(std::abs(probs[0] - 1.0) < 1e-12);
  CHECK(probs[1] < 1e-300);
  const auto lp = p.log_probs(0);
  CHECK(lp[1] == doctest::Approx(-1000.0).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(5);
  Policy p(3, 17);
  auto flat = p.logits_flat();
  for (double& x : flat) x = 20.0 * rng.next_double() - 10.0;
  for (int c = 0; c < 3; ++c) {
    double total = 0.0;
    for (double x : p.softmax_probs(c)) total += x;
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(p.softmax_probs(3), std::invalid_argument);
}

TEST_CASE("sample_item always picks a dominant peak") {
  const auto p = policy_from_logits({50.0, 0.0, 0.0});
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) CHECK(p.sample_item(0, rng) == 0);
}

TEST_CASE("sample_item frequencies match uniform probabilities") {
  const Policy p(1, 4);
  Rng rng(11);
  std::vector<int> counts(4, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(p.sample_item(0, rng))]++;
  for (int y = 0; y < 4; ++y)
    CHECK(std::abs(static_cast<double>(counts[static_cast<std::size_t>(y)]) / n - 0.25) < 0.01);
}

TEST_CASE("sample_item is reproducible for a fixed seed") {
  const auto p = policy_from_logits({0.3, -0.2, 0.9, 0.0});
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(p.sample_item(0, a) == p.sample_item(0, b));
}

TEST_CASE("top_k_items basic ordering and ties") {
  const auto p = policy_from_logits({std::log(0.5), std::log(0.2), std::log(0.3)});
  CHECK(p.top_k_items(0, 2) == std::vector<int>{0, 2});

  const Policy uniform(1, 3);
  CHECK(uniform.top_k_items(0, 3) == std::vector<int>{0, 1, 2});
  CHECK_THROWS_AS(uniform.top_k_items(0, 4), std::invalid_argument);
  CHECK_THROWS_AS(uniform.top_k_items(0, 0), std::invalid_argument);
}

TEST_CASE("top_k_items matches a full-sort oracle") {
  Rng rng(19);
  Policy p(1, 50);
  auto flat = p.logits_flat();
  for (double& x : flat) x = rng.next_double() * 4.0 - 2.0;
  const auto probs = p.softmax_probs(0);
  std::vector<int> oracle(50);
  std::iota(oracle.begin(), oracle.end(), 0);
  std::stable_sort(oracle.begin(), oracle.end(), [&](int a, int b) {
    if (probs[static_cast<std::size_t>(a)] != probs[static_cast<std::size_t>(b)])
      return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
    return a < b;
  });
  for (int k : {1, 7, 50}) {
    const auto got = p.top_k_items(0, k);
    CHECK(std::equal(got.begin(), got.end(), oracle.begin()));
  }
}

TEST_CASE("top_k with k = n is a permutation of all items") {
  Rng rng(3);
  Policy p(1, 23);
  auto flat = p.logits_flat();
  for (double& x : flat) x = rng.next_double();
  auto all = p.top_k_items(0, 23);
  std::sort(all.begin(), all.end());
  for (int y = 0; y < 23; ++y) CHECK(all[static_cast<std::size_t>(y)] == y);
}

TEST_CASE("beam_negatives excludes the positive and deduplicates") {
  const auto peaked = policy_from_logits({5.0, 1.0, 0.0, -1.0});
  CHECK(peaked.beam_negatives(0, 1, 0) == std::vector<int>{1});

  const Policy uniform(1, 4);
  CHECK(uniform.beam_negatives(0, 1, 5) == std::vector<int>{0});
  CHECK(uniform.beam_negatives(0, 1, 0) == std::vector<int>{1});
  CHECK_THROWS_AS(uniform.beam_negatives(0, 4, 0), std::invalid_argument);
}

TEST_CASE("beam_negatives equals the sort-drop-take oracle") {
  Rng rng(29);
  Policy p(1, 100);
  auto flat = p.logits_flat();
  for (double& x : flat) x = rng.next_double() * 3.0;
  const int exclude = 42;
  auto ranking = p.top_k_items(0, 100);
  std::vector<int> oracle;
  for (int y : ranking) {
    if (y == exclude) continue;
    oracle.push_back(y);
    if (oracle.size() == 4) break;
  }
  const auto got = p.beam_negatives(0, 4, exclude);
  CHECK(got == oracle);
  for (int y : got) CHECK(y != exclude);
}

TEST_CASE("center_rows preserves the softmax") {
  Rng rng(31);
  Policy p(2, 9);
  auto flat = p.logits_flat();
  for (double& x : flat) x = rng.next_double() * 10.0;
  const auto before = p.softmax_probs(1);
  p.center_rows();
  const auto after = p.softmax_probs(1);
  for (std::size_t y = 0; y < before.size(); ++y)
    CHECK(after[y] == doctest::Approx(before[y]).epsilon(1e-13));
  double mean = 0.0;
  for (double x : p.logits_row(1)) mean += x;
  CHECK(std::abs(mean) < 1e-12);
}

TEST_CASE("policy JSON round-trip is bit-exact") {
  Rng rng(37);
  Policy p(2, 13);
  auto flat = p.logits_flat();
  for (double& x : flat) x = rng.next_double() * 1e3 - 500.0;
  const Policy q = Policy::from_json(p.to_json());
  const auto a = p.logits_flat();
  const auto b = q.logits_flat();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

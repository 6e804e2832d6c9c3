// Timing comparison between the serial reference kernels and the OpenMP
// paths, on sizes where the parallel split matters.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "reclab/losses.hpp"
#include "reclab/rng.hpp"

using namespace reclab;

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

std::vector<double> random_dist(Rng& rng, int n) {
  std::vector<double> p(static_cast<std::size_t>(n));
  double total = 0.0;
  for (double& x : p) {
    x = 0.1 + rng.next_double();
    total += x;
  }
  for (double& x : p) x /= total;
  return p;
}

Policy random_policy(Rng& rng, int contexts, int items) {
  Policy pol(contexts, items);
  auto flat = pol.logits_flat();
  for (double& x : flat) x = 2.0 * rng.next_double() - 1.0;
  return pol;
}

template <class F>
double time_best_of(int reps, F&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_ms();
    fn();
    best = std::min(best, now_ms() - t0);
  }
  return best;
}

void bench_enumeration(int n) {
  Rng rng(42);
  const auto p = random_dist(rng, n);
  const auto q = random_dist(rng, n);
  const std::vector<double> weight(static_cast<std::size_t>(n), 1.0);
  std::vector<double> score(static_cast<std::size_t>(n));
  for (double& s : score) s = rng.next_double() - 0.5;

  volatile double sink = 0.0;
  const double t_serial = time_best_of(3, [&] {
    sink = serial::enumerated_pair_loss(score, p, q, weight, 0.5).value;
  });
  const double t_parallel = time_best_of(3, [&] {
    sink = enumerated_pair_loss(score, p, q, weight, 0.5).value;
  });
  (void)sink;
  std::printf("pair enumeration   n=%5d        serial %8.2f ms   openmp %8.2f ms   speedup %.2fx\n",
              n, t_serial, t_parallel, t_serial / t_parallel);
}

void bench_batch(int n, int batch) {
  Rng rng(7);
  Policy pol = random_policy(rng, 1, n);
  Policy ref = random_policy(rng, 1, n);
  std::vector<PreferenceTriple> triples;
  triples.reserve(static_cast<std::size_t>(batch));
  for (int i = 0; i < batch; ++i) {
    PreferenceTriple t;
    t.chosen = rng.uniform_int(n);
    int l = rng.uniform_int(n);
    while (l == t.chosen) l = rng.uniform_int(n);
    t.rejected = {l};
    triples.push_back(std::move(t));
  }

  volatile double sink = 0.0;
  const double t_serial = time_best_of(3, [&] {
    sink = serial::dpo_batch_loss(pol, ref, triples, 0.5).value;
  });
  const double t_parallel = time_best_of(3, [&] {
    sink = dpo_batch_loss(pol, ref, triples, 0.5).value;
  });
  (void)sink;
  std::printf("pairwise batch     n=%5d M=%6d serial %8.2f ms   openmp %8.2f ms   speedup %.2fx\n",
              n, batch, t_serial, t_parallel, t_serial / t_parallel);
}

}  // namespace

int main() {
  std::printf("kernel benchmarks (best of 3)\n");
  for (int n : {100, 400, 1000, 2000}) bench_enumeration(n);
  for (auto [n, batch] : std::vector<std::pair<int, int>>{{100, 4096}, {1000, 65536}})
    bench_batch(n, batch);
  return 0;
}

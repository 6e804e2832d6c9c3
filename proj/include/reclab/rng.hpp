#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace reclab {

// SplitMix64 finalizer, used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives a stream seed from a master seed plus up to three stream ids.
// Every consumer of randomness gets its own stream; RNG state is never
// shared implicitly between unrelated steps.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = splitmix64(seed ^ 0x243f6a8885a308d3ULL);
  s = splitmix64(s ^ a);
  s = splitmix64(s ^ b);
  s = splitmix64(s ^ c);
  return s;
}

// mt19937_64 wrapper with hand-rolled draws. The standard distributions are
// implementation-defined, so sampling is done from raw engine output to keep
// results reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1), 53 bits.
  double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    int v = static_cast<int>(next_double() * static_cast<double>(n));
    return v >= n ? n - 1 : v;
  }

  // Draw from a probability vector by CDF walk. Entries <= 0 are skipped;
  // accumulated rounding in the tail falls back to the last positive entry.
  int categorical(std::span<const double> probs) {
    const double u = next_double();
    double acc = 0.0;
    int last = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      last = static_cast<int>(i);
      acc += probs[i];
      if (u < acc) return last;
    }
    return last;
  }

  // Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      const int j = uniform_int(i + 1);
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace reclab

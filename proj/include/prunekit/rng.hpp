#pragma once

#include <cstdint>
#include <string>

namespace prunekit {

// SplitMix64 generator. Chosen over std:: distributions because its output
// stream is fully specified, so seeded runs reproduce bit-exactly across
// compilers and platforms. The `name` is recorded in run reports so a
// result can be traced back to the exact random stream that produced it.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::string name = "splitmix64")
      : state_(seed), name_(std::move(name)) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t next_below(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased for any n.
    std::uint64_t threshold = (0ULL - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Derive an independent stream, e.g. per layer or per epoch.
  Rng fork(std::uint64_t salt) const {
    return Rng(state_ ^ (0x517cc1b727220a95ULL * (salt + 1)), name_);
  }

  const std::string& name() const { return name_; }

 private:
  std::uint64_t state_;
  std::string name_;
};

// Fisher-Yates shuffle driven by Rng so the permutation is reproducible.
template <typename Vec>
void shuffle(Vec& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace prunekit

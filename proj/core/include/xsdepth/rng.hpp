#pragma once

#include <cmath>
#include <cstdint>

#include "xsdepth/common.hpp"

namespace xsdepth {

// Deterministic PRNG with explicit output algorithms, so generated corpora,
// weight initializations and sampling orders are identical on every platform
// (std::uniform_real_distribution / std::normal_distribution are not
// implementation-pinned).
//
// Core generator: SplitMix64.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  Scalar uniform() { return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t uniform_index(uint64_t n) {
    // Rejection-free modulo bias is negligible for n << 2^64 but we avoid it
    // anyway to keep sampling sequences well defined.
    uint64_t threshold = (0ULL - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller (both values used, cached).
  Scalar normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    Scalar u1 = uniform();
    Scalar u2 = uniform();
    // Guard the log at u1 == 0.
    if (u1 < 1e-300) u1 = 1e-300;
    Scalar r = std::sqrt(-2.0 * std::log(u1));
    Scalar a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  Scalar normal(Scalar mean, Scalar stddev) { return mean + stddev * normal(); }

  // Derive an independent stream; used to decouple sampling orders (e.g. the
  // vis-step source stream from the transfer-step source stream).
  Rng fork(uint64_t stream) const {
    Rng r(state_ ^ (0x632be59bd9b4e019ULL * (stream + 1)));
    r.next_u64();
    return r;
  }

 private:
  uint64_t state_;
  bool have_cached_ = false;
  Scalar cached_ = 0.0;
};

// Deterministic Fisher-Yates shuffle of indices [0, n).
template <typename Vec>
void shuffle_indices(Vec& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.uniform_index(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace xsdepth

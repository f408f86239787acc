#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace conlasso {

// Counter-based 64-bit generator: an incrementing Weyl sequence pushed
// through the splitmix64 finalizer. The stream for a given seed is
// bit-identical on every platform and in any language that reproduces
// the three shift-xor-multiply steps below. Normal variates are
// Box-Muller on consecutive uniforms, drawn in a fixed order with no
// rejection loop, so they are portable too.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform on (0, 1]; the +1 keeps log() finite in next_normal
  double next_uniform() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double two_pi = 6.283185307179586476925286766559;
    double u1 = next_uniform();
    double u2 = next_uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(two_pi * u2);
    have_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  // integer in [0, n); modulo bias is 2^-64 * n, negligible at our scales
  // and exactly reproducible across platforms
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // partial Fisher-Yates: the first `count` entries of a shuffled 0..n-1
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (count > n) count = n;
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t j = i + static_cast<std::size_t>(next_below(n - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    return idx;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// decorrelates sub-streams (fold / subsample indices) from a user seed
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
  Rng r(seed ^ (0xA5A5A5A5DEADBEEFULL + stream * 0x9E3779B97F4A7C15ULL));
  return r.next_u64();
}

}  // namespace conlasso

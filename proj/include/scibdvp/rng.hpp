// Counter-based deterministic random streams.
//
// Every random draw in the library comes from a CounterRng keyed by
// (seed, stream purpose, instance). Streams are independent of each other
// and of consumption order elsewhere, so masks, noise and per-patch DVP
// latents reproduce bit-exactly regardless of scheduling.

#pragma once

#include <cmath>
#include <cstdint>

namespace scibdvp {

// Purpose tag separating the random streams that share one user seed.
enum class Stream : std::uint64_t {
  Mask = 0x6d61736bULL,        // "mask"
  Noise = 0x6e6f6973ULL,       // "nois"
  Latent = 0x6c61746eULL,      // "latn"
  Weights = 0x77656967ULL,     // "weig"
  Synthetic = 0x73796e74ULL,   // "synt"
  MonteCarlo = 0x6d636d63ULL,  // "mcmc"
};

namespace detail {

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

}  // namespace detail

// Mixes sub-identifiers (scale index, region index, outer iteration, ...)
// into one instance id for stream derivation.
inline std::uint64_t stream_instance(std::uint64_t a, std::uint64_t b = 0,
                                     std::uint64_t c = 0) {
  return detail::combine(detail::combine(a, b), c);
}

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, Stream purpose, std::uint64_t instance = 0)
      : key_(detail::combine(
            detail::combine(detail::mix64(seed),
                            static_cast<std::uint64_t>(purpose)),
            instance)) {}

  std::uint64_t next_u64() { return detail::mix64(key_ + counter_++ * 0x9e3779b97f4a7c15ULL); }

  // Uniform in [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double next_unit_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  bool next_bernoulli(double p) { return next_unit() < p; }

  // Standard normal via Box-Muller; the paired value is cached.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_unit_pos();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace scibdvp

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <string>
#include <string_view>

namespace wcn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Derives disjoint named substreams from one master seed.  Every consumer of
// randomness (each link, the arrival process, each sweep replicate) gets its
// own stream, so changing one consumer never shifts the draws of another.
class StreamFactory {
 public:
  explicit StreamFactory(std::uint64_t master) : master_(master) {}

  std::uint64_t derive(std::string_view tag) const {
    return splitmix64(splitmix64(master_ ^ fnv1a64(tag)));
  }

  std::mt19937_64 stream(std::string_view tag) const {
    return std::mt19937_64(derive(tag));
  }

  StreamFactory child(std::string_view tag) const {
    return StreamFactory(derive(tag));
  }

  std::uint64_t master() const { return master_; }

 private:
  std::uint64_t master_;
};

inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Mean-mu exponential via inversion.
inline double sample_exponential(std::mt19937_64& g, double mean) {
  return -mean * std::log1p(-uniform01(g));
}

// Box-Muller pair; both values are always produced so the draw count per call
// is fixed (two uniforms), which keeps streams alignment-stable.
inline void sample_normal_pair(std::mt19937_64& g, double& z0, double& z1) {
  double u1 = uniform01(g);
  double u2 = uniform01(g);
  while (u1 <= 0.0) u1 = uniform01(g);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * 3.141592653589793238462643383279502884 * u2;
  z0 = r * std::cos(th);
  z1 = r * std::sin(th);
}

// Knuth's product method; fine for the per-client means used here.
inline std::uint64_t sample_poisson(std::mt19937_64& g, double mean) {
  if (mean <= 0.0) return 0;
  if (mean < 30.0) {
    const double limit = std::exp(-mean);
    std::uint64_t n = 0;
    double prod = uniform01(g);
    while (prod > limit) {
      ++n;
      prod *= uniform01(g);
    }
    return n;
  }
  // Split large means to keep the product method in safe floating range.
  std::uint64_t n = sample_poisson(g, mean / 2.0);
  return n + sample_poisson(g, mean - mean / 2.0);
}

// Order-sensitive checksum over sampled values; used to verify that paired
// runs (e.g. broadcast vs outage with common random numbers) saw the exact
// same gain sequence.
class BitChecksum {
 public:
  void add(double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    h_ ^= bits;
    h_ *= 1099511628211ULL;
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 14695981039346656037ULL;
};

}  // namespace wcn

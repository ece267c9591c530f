#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace pftrack {

// splitmix64: tiny, seedable, identical output everywhere. All randomness in
// the project (simulator draws, weight init, batch sampling) goes through
// this so runs are reproducible from a single integer seed.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; the spare value is cached so the draw sequence stays
  // deterministic regardless of call pattern.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

  // isotropic direction scaled to unit norm
  std::vector<double> unit_vector(int dim) {
    std::vector<double> v(dim);
    double norm2 = 0.0;
    for (int i = 0; i < dim; ++i) {
      v[i] = gaussian();
      norm2 += v[i] * v[i];
    }
    const double inv = 1.0 / std::sqrt(norm2 > 0 ? norm2 : 1.0);
    for (double& x : v) x *= inv;
    return v;
  }

  // inversion sampling; rates used here are small
  int poisson(double rate) {
    if (rate <= 0.0) return 0;
    const double l = std::exp(-rate);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > l);
    return k - 1;
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// FNV-1a, used for config hashes in run manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace pftrack

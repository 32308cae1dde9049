#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

namespace switcheff {

// splitmix64 step (Steele, Lea & Flood 2014). Used to derive independent
// stream seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Stream derivation: replicate_seed = splitmix64 hash of (master, index).
// Fixed for this artifact so runs are reproducible across invocations.
inline std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s = a ^ (index + 0x9E3779B97F4A7C15ULL);
  return splitmix64(s);
}

// Seedable generator used throughout the simulation module.
// Engine: std::mt19937_64 (bit-exact sequence fixed by the standard).
// Uniforms: 53-bit mantissa draws in the open interval (0,1).
// Normals: classic Box-Muller with the spare deviate cached.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // strictly inside (0,1); never returns an endpoint
  double uniform() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  // correlated pair with common mean/unit variance
  std::pair<double, double> bivariate_normal(double mean, double correlation) {
    const double z1 = normal();
    const double z2 = normal();
    const double x = mean + z1;
    const double y = mean + correlation * z1 + std::sqrt(1.0 - correlation * correlation) * z2;
    return {x, y};
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace switcheff

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <span>
#include <string>
#include <string_view>

#include "art/error.hpp"

namespace art {

// Seeded generator shared by every stochastic routine. The full state
// (engine plus the normal distribution's cached draw) round-trips through
// save_state / load_state so a restored run continues bit-identically.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) : engine_(seed) {}

  double normal() { return normal_(engine_); }

  // Uniform on the open interval (0, 1).
  double uniform_open() {
    for (;;) {
      const double u = std::generate_canonical<double, 53>(engine_);
      if (u > 0.0) return u;
    }
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_open(); }

  // Standard Gumbel(0, 1) via -log(-log(U)).
  double gumbel() { return -std::log(-std::log(uniform_open())); }

  std::size_t uniform_index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(engine_);
  }

  // Inverse-CDF draw from unnormalized non-negative weights.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0) || !std::isfinite(total)) throw Error("categorical: weights must have a positive finite sum");
    const double target = uniform_open() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (target < acc) return i;
    }
    // Rounding can leave target == total; return the last positive weight.
    for (std::size_t i = weights.size(); i-- > 0;)
      if (weights[i] > 0.0) return i;
    return weights.size() - 1;
  }

  bool bernoulli(double p) { return uniform_open() < p; }

  std::mt19937_64& engine() { return engine_; }

  std::string save_state() const {
    std::ostringstream os;
    os << engine_ << ' ' << normal_;
    return os.str();
  }

  void load_state(const std::string& text) {
    std::istringstream is(text);
    is >> engine_ >> normal_;
    if (!is) throw Error("rng: corrupt state string");
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Stable 64-bit FNV-1a hash used to derive per-cell seeds.
inline std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace art

#pragma once

#include <cstdint>
#include <random>

namespace gpsgld {

/// Splittable random stream. Substreams derived with split() are seeded by
/// hashing fresh output of the parent, so replicas / chains / probe draws
/// each get an independent, reproducible stream from one root seed.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : id_(seed), engine_(mix(seed)) {}

  /// Derives an independent child stream; advances this stream.
  RngStream split() {
    std::uint64_t key = engine_();
    return RngStream(mix(key ^ 0x9e3779b97f4a7c15ull), key);
  }

  double uniform() { return unit_(engine_); }

  double normal() { return gauss_(engine_); }

  /// Gamma(shape, rate) draw.
  double gamma(double shape, double rate) {
    std::gamma_distribution<double> g(shape, 1.0 / rate);
    return g(engine_);
  }

  /// +1 or -1 with probability 1/2 each.
  double rademacher() { return (engine_() & 1u) ? 1.0 : -1.0; }

  std::uint64_t id() const { return id_; }
  std::mt19937_64& engine() { return engine_; }

 private:
  RngStream(std::uint64_t seed, std::uint64_t id) : id_(id), engine_(seed) {}

  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t id_;
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

}  // namespace gpsgld

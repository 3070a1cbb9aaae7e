#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace matfdr {

// splitmix64, used to expand seeds into generator state and to derive
// independent streams. Output depends only on the input word.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ with all distribution transforms implemented locally, so the
// draw sequence for a given seed is identical on every platform and stdlib.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
    have_spare_ = false;
    spare_ = 0.0;
  }

  // Independent generator for sub-task `index` of a computation seeded with
  // `seed`. Parallel and serial execution see the same per-index sequences.
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t a = seed;
    std::uint64_t b = index + 0x632be59bd9b4e019ULL;
    return Rng(splitmix64(a) ^ splitmix64(b));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n); Lemire's multiply-shift, no rejection loop.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Box-Muller; the spare is cached so draws come in deterministic order.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * kPi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Exponential with the given mean.
  double exponential(double mean) {
    double u = uniform01();
    while (u <= 0.0) u = uniform01();
    return -mean * std::log(u);
  }

  // Student-t with integer dof >= 3 (finite variance), unit scale.
  double student_t(int dof) {
    if (dof < 3) throw std::invalid_argument("student_t: dof must be >= 3");
    const double z = normal();
    double chi2 = 0.0;
    for (int i = 0; i < dof; ++i) {
      const double g = normal();
      chi2 += g * g;
    }
    return z / std::sqrt(chi2 / static_cast<double>(dof));
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4] = {};
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace matfdr

#pragma once
#include <cmath>
#include <cstdint>

namespace hemo::rng {

// splitmix64, used only to expand (seed, stream) into xoshiro state.
struct SplitMix64 {
  std::uint64_t s;
  explicit SplitMix64(std::uint64_t seed) : s(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
};

// xoshiro256++ with splitmix-derived streams. Replica r of a run seeded s
// draws from stream(s, r); streams are disjoint with overwhelming probability.
// All variate recipes below are fixed by this header, not by libstdc++, so a
// (seed, stream) pair replays bit-identically across platforms.
class Xoshiro256pp {
public:
  Xoshiro256pp(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 sm(seed ^ (0x9e3779b97f4a7c15ull * (stream + 1)));
    for (auto& w : s_) w = sm.next();
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;  // all-zero state is invalid
    haveSpare_ = false;
    spare_ = 0;
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform on [0,1), 53 random bits
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // uniform on (0,1]
  double uniformPos() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

  // standard exponential
  double exponential() { return -std::log(uniformPos()); }

  // standard normal, Box-Muller with cached second variate
  double normal() {
    if (haveSpare_) {
      haveSpare_ = false;
      return spare_;
    }
    const double u1 = uniformPos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    haveSpare_ = true;
    return r * std::cos(a);
  }

  // Poisson(lambda): Knuth inversion below 10, Hormann PTRD above.
  std::int64_t poisson(double lambda) {
    if (!(lambda > 0.0)) return 0;
    return lambda < 10.0 ? poissonInversion(lambda) : poissonPtrd(lambda);
  }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::int64_t poissonInversion(double lambda) {
    const double limit = std::exp(-lambda);
    double prod = 1.0;
    std::int64_t k = 0;
    do {
      prod *= uniform();
      if (prod <= limit) return k;
      ++k;
    } while (k < 2000);
    return k;  // unreachable for lambda < 10
  }

  // Hormann (1993), transformed rejection with decomposition, valid lambda >= 10
  std::int64_t poissonPtrd(double lambda) {
    const double smu = std::sqrt(lambda);
    const double b = 0.931 + 2.53 * smu;
    const double a = -0.059 + 0.02483 * b;
    const double invAlpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    const double lnLambda = std::log(lambda);
    for (;;) {
      double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::fabs(u);
      const double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
      if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(kf);
      if (kf < 0.0 || (us < 0.013 && v > us)) continue;
      const double k = kf;
      if (std::log(v * invAlpha / (a / (us * us) + b)) <=
          k * lnLambda - lambda - std::lgamma(k + 1.0))
        return static_cast<std::int64_t>(kf);
    }
  }

  std::uint64_t s_[4];
  double spare_;
  bool haveSpare_;
};

}  // namespace hemo::rng

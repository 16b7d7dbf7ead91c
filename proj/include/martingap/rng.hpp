#pragma once

#include <cmath>
#include <cstdint>

namespace martingap {

// splitmix64 finalizer (public-domain mixer). Used both as the stream
// generator and for deriving per-work-item seeds, so that results are
// bit-identical across platforms and independent of scheduling order.
inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d49bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

// Stable seed for work item `stream` under a master seed. Nestable.
inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
  return mix64(master + kGoldenGamma * (stream + 1));
}

// Name reported in output metadata next to every stored seed.
inline const char* rng_algorithm() { return "splitmix64"; }

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += kGoldenGamma);
    return mix64(z);
  }

  // Uniform on [0,1) with 53 random mantissa bits.
  double uniform01() { return double(next() >> 11) * 0x1.0p-53; }

  // Uniform on [0,n) by rejection; unbiased for any n >= 1.
  uint64_t below(uint64_t n) {
    const uint64_t threshold = (-n) % n;
    for (;;) {
      uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  // Marsaglia polar method; consumes a variable number of draws, which is
  // fine because every consumer owns a derived seed.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  template <class T>
  void shuffle(T* data, size_t n) {
    for (size_t i = n; i > 1; --i) {
      size_t j = size_t(below(i));
      T tmp = data[i - 1];
      data[i - 1] = data[j];
      data[j] = tmp;
    }
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace martingap

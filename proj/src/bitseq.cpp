#include "martingap/bitseq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "martingap/rng.hpp"

namespace martingap {

long BitSequence::ones() const {
  return std::accumulate(bits.begin(), bits.end(), 0L);
}

bool BitSequence::balanced() const {
  return ones() == long((bits.size() + 1) / 2);
}

bool PermutationSpec::valid() const {
  std::vector<uint8_t> seen(map.size(), 0);
  for (uint32_t v : map) {
    if (v >= map.size() || seen[v]) return false;
    seen[v] = 1;
  }
  return true;
}

PermutationSpec PermutationSpec::inverse() const {
  PermutationSpec inv;
  inv.seed = seed;
  inv.map.resize(map.size());
  for (size_t i = 0; i < map.size(); ++i) inv.map[map[i]] = uint32_t(i);
  return inv;
}

double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::domain_error("binary_entropy: p outside [0,1]");
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
  return h;
}

std::vector<BitSequence> balanced_sequences(long n, long count, uint64_t seed) {
  if (n < 2 || n % 2 != 0)
    throw std::invalid_argument("balanced_sequences: n must be even and >= 2");
  if (count < 1)
    throw std::invalid_argument("balanced_sequences: count must be >= 1");
  std::vector<BitSequence> out{size_t(count)};
  for (long k = 0; k < count; ++k) {
    BitSequence s;
    s.bits.assign(size_t(n), 0);
    std::fill(s.bits.begin(), s.bits.begin() + n / 2, uint8_t(1));
    Rng rng(derive_seed(seed, uint64_t(k)));
    rng.shuffle(s.bits.data(), s.bits.size());
    out[size_t(k)] = std::move(s);
  }
  return out;
}

PermutationSpec random_permutation(size_t n, uint64_t seed) {
  PermutationSpec p;
  p.seed = seed;
  p.map.resize(n);
  std::iota(p.map.begin(), p.map.end(), 0u);
  Rng rng(seed);
  rng.shuffle(p.map.data(), p.map.size());
  return p;
}

BitSequence apply_permutation(const BitSequence& x, const PermutationSpec& perm) {
  if (x.size() != perm.size())
    throw std::invalid_argument("apply_permutation: size mismatch");
  if (!perm.valid())
    throw std::invalid_argument("apply_permutation: map is not a bijection");
  BitSequence out;
  out.bits.resize(x.size());
  for (size_t i = 0; i < x.size(); ++i) out.bits[i] = x.bits[perm.map[i]];
  return out;
}

double pe_squared_distance(long i, long j, long n, const PeGeometry& geo) {
  if (n < 1) throw std::invalid_argument("pe_squared_distance: n must be >= 1");
  if (geo.sigma2_pe < 0.0)
    throw std::domain_error("pe_squared_distance: sigma2_pe must be >= 0");
  const double d = double(std::labs(i - j));
  return 2.0 * geo.sigma2_pe * (1.0 - std::cos(2.0 * M_PI * d / double(n)));
}

uint64_t fnv1a64(const void* data, size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string digest_hex(uint64_t h) {
  static const char* hexd = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[size_t(i)] = hexd[h & 0xf];
    h >>= 4;
  }
  return s;
}

}  // namespace martingap

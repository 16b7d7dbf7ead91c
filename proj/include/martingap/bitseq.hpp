#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace martingap {

// Binary sequence with its one-count. "Balanced" means ones == ceil(n/2).
struct BitSequence {
  std::vector<uint8_t> bits;

  size_t size() const { return bits.size(); }
  long ones() const;
  bool balanced() const;
};

// Explicit bijection on positions [0, n), carried with the seed that
// produced it so runs can be replayed.
struct PermutationSpec {
  std::vector<uint32_t> map;  // output position i takes input bit map[i]
  uint64_t seed = 0;

  size_t size() const { return map.size(); }
  bool valid() const;  // true iff `map` is a bijection
  PermutationSpec inverse() const;
};

// Rotary positional-encoding geometry: scale and base period.
struct PeGeometry {
  double sigma2_pe = 1.0;  // >= 0
  double period = 64.0;    // > 0
};

// H(p) in bits; 0*log2(0) taken as 0. Throws std::domain_error outside [0,1].
double binary_entropy(double p);

// `count` independent uniform draws from the balanced length-n sequences
// (exactly n/2 ones; n even, >= 2). Deterministic in (n, count, seed).
std::vector<BitSequence> balanced_sequences(long n, long count, uint64_t seed);

// Uniform random permutation of [0, n).
PermutationSpec random_permutation(size_t n, uint64_t seed);

// out[i] = x[perm.map[i]]. Throws std::invalid_argument on size mismatch
// or a non-bijective map.
BitSequence apply_permutation(const BitSequence& x, const PermutationSpec& perm);

// Squared rotary-embedding distance between positions i and j out of n:
// 2*sigma2_pe*(1 - cos(2*pi*|i-j|/n)). Bounded by 4*sigma2_pe.
double pe_squared_distance(long i, long j, long n, const PeGeometry& geo);

// FNV-1a 64-bit digest, hex-encoded; used for content digests in run
// manifests and fit provenance.
uint64_t fnv1a64(const void* data, size_t len);
std::string digest_hex(uint64_t h);

}  // namespace martingap

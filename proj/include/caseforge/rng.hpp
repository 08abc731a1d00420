#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace caseforge {

// Deterministic generator with explicit draw primitives. The standard
// <random> distributions are implementation-defined, so byte-identical
// artifacts across toolchains require owning both the engine and the
// uniform mappings.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // [0, 1) with 53 bits of precision.
  double uniform();

  // [0, n); unbiased via rejection. n must be > 0.
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t state_;
};

// Derives an independent stream seed from a base seed and a named path,
// e.g. derive_seed(seed, {"diversify", conv_id, "3"}). All pipeline
// randomness flows through this so results are order- and
// scheduling-independent.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::string_view> path);

}  // namespace caseforge

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "factweave/fact_index.hpp"
#include "factweave/model.hpp"

namespace factweave {

struct SynthClaimMeta {
  long id = 0;
  int kg_bit = 0;    // 1 iff the hub bridges alpha-beta (alpha-gamma otherwise)
  int fact_bit = 0;  // 1 iff the claim's true fact carries the marker token
};

/// Heterogeneous-knowledge benchmark where neither source suffices alone:
/// each label is the XOR of a KG-derivable bit (which seeded concept the
/// 2-hop bridge reaches) and a fact-derivable bit (the marker token of the
/// top-ranked fact). The bits are independent uniform, so a single source
/// caps at 50% accuracy while both together reach 100%. Decoy facts carry
/// uncorrelated marker tokens and the subgraph shape is identical for both
/// bit values, so shortcuts through marker counting or node counting stay
/// at chance.
struct SynthBenchmark {
  std::vector<std::array<std::string, 3>> triples;
  std::vector<Fact> facts;
  std::vector<Claim> train;
  std::vector<Claim> dev;
  std::vector<Claim> test;
  std::vector<SynthClaimMeta> meta;  // across all splits, indexed by claim id
};

SynthBenchmark synth_xor_benchmark(std::uint64_t seed, std::size_t n_train, std::size_t n_dev,
                                   std::size_t n_test);

}  // namespace factweave

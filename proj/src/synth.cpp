#include "factweave/synth.hpp"

#include <cstdio>

#include "factweave/rng.hpp"

namespace factweave {

namespace {

std::string padded(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%05zu", prefix, i);
  return buf;
}

}  // namespace

// Each claim seeds three concepts (alpha, beta, gamma). The hub concept
// bridges alpha with beta when the KG bit is set, alpha with gamma
// otherwise, so the subgraph always has four concepts and two c2c edges and
// the bit lives purely in which flavored endpoint the bridge touches.
//
// The fact corpus carries one true fact per claim plus decoys with noise
// marker tokens. Flavored decoys mention the same concepts as the true fact
// (identical c2f edges, identical token flavor), so no fixed readout
// direction separates them; only the claim-specific token overlap (the case
// token) singles the true fact out. Marker counting, edge counting and node
// counting all sit at chance by construction.
SynthBenchmark synth_xor_benchmark(std::uint64_t seed, std::size_t n_train, std::size_t n_dev,
                                   std::size_t n_test) {
  SynthBenchmark bench;
  Rng rng(Rng::derive(seed, 0x5f5f));
  const std::size_t total = n_train + n_dev + n_test;
  constexpr std::size_t kFlavoredDecoys = 2;
  constexpr std::size_t kPlainDecoys = 2;
  constexpr std::size_t kFactsPerClaim = 1 + kFlavoredDecoys + kPlainDecoys;

  for (std::size_t i = 0; i < total; ++i) {
    const std::string topic = padded("topic", i);
    const std::string kase = padded("case", i);
    const std::string alpha = padded("alpha", i);
    const std::string ident = padded("", i);
    const std::string beta = "beta_" + ident;
    const std::string gamma = "gamma_" + ident;
    const std::string hub = "hub_" + ident;
    const int kg_bit = rng.bernoulli(0.5) ? 1 : 0;
    const int fact_bit = rng.bernoulli(0.5) ? 1 : 0;

    // Anchor triples keep every seed present in the KG; the aux endpoints
    // touch one seed only, so they never join the subgraph.
    bench.triples.push_back({alpha, "relatedto", padded("auxa", i)});
    bench.triples.push_back({beta, "relatedto", padded("auxb", i)});
    bench.triples.push_back({gamma, "relatedto", padded("auxg", i)});
    bench.triples.push_back({alpha, "relatedto", hub});
    bench.triples.push_back({hub, "relatedto", kg_bit ? beta : gamma});

    const char* true_marker = fact_bit ? "veritoken" : "pseudotoken";
    std::size_t fact_no = 0;
    Fact true_fact;
    true_fact.id = static_cast<long>(i * kFactsPerClaim + fact_no++);
    true_fact.text = topic + " record under " + kase + " report on " + alpha + " and beta " +
                     ident + " " + true_marker;
    bench.facts.push_back(std::move(true_fact));
    for (std::size_t j = 0; j < kFlavoredDecoys; ++j) {
      const char* noise_marker = rng.bernoulli(0.5) ? "veritoken" : "pseudotoken";
      Fact decoy;
      decoy.id = static_cast<long>(i * kFactsPerClaim + fact_no++);
      decoy.text = topic + " brief " + alpha + " beta " + ident + " " + noise_marker + " " +
                   padded("fill", i * kFactsPerClaim + j);
      bench.facts.push_back(std::move(decoy));
    }
    for (std::size_t j = 0; j < kPlainDecoys; ++j) {
      const char* noise_marker = rng.bernoulli(0.5) ? "veritoken" : "pseudotoken";
      Fact decoy;
      decoy.id = static_cast<long>(i * kFactsPerClaim + fact_no++);
      decoy.text = topic + " memo " + noise_marker + " item " +
                   padded("fill", i * kFactsPerClaim + kFlavoredDecoys + j);
      bench.facts.push_back(std::move(decoy));
    }

    Claim claim;
    claim.id = static_cast<long>(i);
    claim.text = "the " + topic + " record links " + alpha + " with beta " + padded("", i) +
                 " and gamma " + padded("", i) + " under " + kase;
    claim.label = kg_bit ^ fact_bit;
    if (i < n_train) {
      bench.train.push_back(std::move(claim));
    } else if (i < n_train + n_dev) {
      bench.dev.push_back(std::move(claim));
    } else {
      bench.test.push_back(std::move(claim));
    }

    bench.meta.push_back(SynthClaimMeta{static_cast<long>(i), kg_bit, fact_bit});
  }
  return bench;
}

}  // namespace factweave

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace factweave {

struct Fact {
  long id = 0;
  std::string text;
};

/// Seam for the frozen dual encoder: deterministic text -> vector of fixed
/// width. The trained encoder itself is external; production runs load its
/// precomputed vectors, tests and desk runs use HashEmbedder.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> embed(std::string_view text) const = 0;
};

/// Feature-hashing embedder: each normalized token lands in a signed bucket
/// (FNV-1a, seeded), the vector is L2-normalized. Empty text embeds to the
/// zero vector.
class HashEmbedder final : public Embedder {
 public:
  HashEmbedder(std::size_t dim, std::uint64_t seed);
  std::size_t dim() const override { return dim_; }
  std::vector<double> embed(std::string_view text) const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

struct ScoredFact {
  std::size_t pos = 0;  // position in the index
  long id = 0;
  double score = 0.0;
};

/// Facts with embeddings aligned by position.
class FactIndex {
 public:
  FactIndex() = default;

  static FactIndex build(std::vector<Fact> facts, const Embedder& embedder);
  /// facts: JSON Lines of {"id": int, "text": string}. embeddings: either
  /// the binary tensor container (single tensor named "fact_embeddings")
  /// or TSV with one row of doubles per fact.
  static FactIndex load(const std::filesystem::path& facts_path,
                        const std::filesystem::path& embeddings_path);
  static FactIndex from_rows(std::vector<Fact> facts, std::vector<std::vector<double>> rows);

  std::size_t size() const { return facts_.size(); }
  std::size_t dim() const { return dim_; }
  const Fact& fact(std::size_t pos) const { return facts_[pos]; }
  const std::vector<double>& embedding(std::size_t pos) const { return embeddings_[pos]; }

  /// Top-k facts by dot-product relevance, score descending, ties broken by
  /// ascending fact id. k > size() returns everything; an empty index
  /// returns an empty list.
  std::vector<ScoredFact> top_k(std::span<const double> query, std::size_t k) const;

 private:
  std::vector<Fact> facts_;
  std::vector<std::vector<double>> embeddings_;
  std::size_t dim_ = 0;
};

/// Dot-product relevance score.
double relevance(std::span<const double> q, std::span<const double> f);

std::vector<Fact> load_facts_jsonl(const std::filesystem::path& path);

}  // namespace factweave

#include "factweave/fact_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "factweave/checkpoint.hpp"
#include "factweave/error.hpp"
#include "factweave/text.hpp"

namespace factweave {

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

HashEmbedder::HashEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim_ == 0) throw ContractError("hash embedder needs dim >= 1");
}

std::vector<double> HashEmbedder::embed(std::string_view text) const {
  std::vector<double> v(dim_, 0.0);
  double norm_sq = 0.0;
  for (const std::string& token : tokenize(text)) {
    const std::uint64_t h = fnv1a(token, seed_);
    const std::size_t bucket = static_cast<std::size_t>(h % dim_);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    v[bucket] += sign;
  }
  for (double x : v) norm_sq += x * x;
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : v) x *= inv;
  }
  return v;
}

double relevance(std::span<const double> q, std::span<const double> f) {
  if (q.size() != f.size()) {
    throw DimensionError("relevance length mismatch: " + std::to_string(q.size()) + " vs " +
                         std::to_string(f.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) s += q[i] * f[i];
  return s;
}

FactIndex FactIndex::build(std::vector<Fact> facts, const Embedder& embedder) {
  FactIndex index;
  index.dim_ = embedder.dim();
  index.embeddings_.reserve(facts.size());
  for (const Fact& f : facts) index.embeddings_.push_back(embedder.embed(f.text));
  index.facts_ = std::move(facts);
  return index;
}

FactIndex FactIndex::from_rows(std::vector<Fact> facts, std::vector<std::vector<double>> rows) {
  if (facts.size() != rows.size()) {
    throw ParseError("fact/embedding count mismatch: " + std::to_string(facts.size()) +
                     " facts vs " + std::to_string(rows.size()) + " rows");
  }
  FactIndex index;
  index.dim_ = rows.empty() ? 0 : rows.front().size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != index.dim_) {
      throw ParseError("embedding width mismatch at row " + std::to_string(i) + ": " +
                       std::to_string(rows[i].size()) + " vs " + std::to_string(index.dim_));
    }
  }
  index.facts_ = std::move(facts);
  index.embeddings_ = std::move(rows);
  return index;
}

std::vector<Fact> load_facts_jsonl(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open facts file: " + path.string());
  std::vector<Fact> facts;
  std::unordered_set<long> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("id") || !j.contains("text")) {
      throw ParseError("malformed fact at " + path.string() + ":" + std::to_string(line_no));
    }
    Fact f;
    f.id = j["id"].get<long>();
    f.text = j["text"].get<std::string>();
    if (f.text.empty()) {
      throw ParseError("empty fact text at " + path.string() + ":" + std::to_string(line_no));
    }
    if (!ids.insert(f.id).second) {
      throw ParseError("duplicate fact id " + std::to_string(f.id) + " at " + path.string() +
                       ":" + std::to_string(line_no));
    }
    facts.push_back(std::move(f));
  }
  return facts;
}

namespace {

std::vector<std::vector<double>> load_embedding_rows(const std::filesystem::path& path) {
  // Binary container first, TSV fallback.
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open embeddings file: " + path.string());
    char magic[4] = {0, 0, 0, 0};
    probe.read(magic, 4);
    if (probe && std::string_view(magic, 4) == "DCKR") {
      auto tensors = load_checkpoint(path);
      auto it = tensors.find("fact_embeddings");
      if (it == tensors.end()) {
        throw ParseError("embeddings container lacks tensor 'fact_embeddings': " + path.string());
      }
      const Tensor& t = it->second;
      if (t.rank() != 2) {
        throw ParseError("fact_embeddings must be rank-2, got " + t.shape_str());
      }
      std::vector<std::vector<double>> rows(t.rows());
      for (std::size_t i = 0; i < t.rows(); ++i) {
        rows[i].assign(t.data().begin() + static_cast<std::ptrdiff_t>(i * t.cols()),
                       t.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * t.cols()));
      }
      return rows;
    }
  }
  std::ifstream is(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) {
      throw ParseError("non-numeric embedding value at " + path.string() + ":" +
                       std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

FactIndex FactIndex::load(const std::filesystem::path& facts_path,
                          const std::filesystem::path& embeddings_path) {
  return from_rows(load_facts_jsonl(facts_path), load_embedding_rows(embeddings_path));
}

std::vector<ScoredFact> FactIndex::top_k(std::span<const double> query, std::size_t k) const {
  if (k == 0) throw ContractError("top_k needs k >= 1");
  std::vector<ScoredFact> scored;
  scored.reserve(facts_.size());
  for (std::size_t pos = 0; pos < facts_.size(); ++pos) {
    scored.push_back(ScoredFact{pos, facts_[pos].id, relevance(query, embeddings_[pos])});
  }
  auto better = [](const ScoredFact& a, const ScoredFact& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  };
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), better);
  scored.resize(take);
  return scored;
}

}  // namespace factweave

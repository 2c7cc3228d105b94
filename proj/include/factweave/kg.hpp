#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace factweave {

struct Triple {
  int head = 0;
  std::string relation;
  int tail = 0;
};

/// Directed multigraph of concepts loaded from a TSV of
/// `head<TAB>relation<TAB>tail` lines. Concept ids are dense in [0, |V|),
/// assigned in order of first appearance. Immutable after load; all queries
/// are read-only.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  /// Lines starting with '#' and blank lines are skipped. Exact duplicate
  /// triples are dropped. Malformed lines raise ParseError with the line
  /// number; an empty file yields a valid empty graph (with a warning).
  static KnowledgeGraph load(const std::filesystem::path& path);

  static KnowledgeGraph from_triples(
      const std::vector<std::array<std::string, 3>>& triples);

  std::size_t concept_count() const { return surfaces_.size(); }
  std::size_t triple_count() const { return triples_.size(); }

  const std::string& surface(int id) const { return surfaces_[static_cast<std::size_t>(id)]; }
  /// Lookup by normalized surface form ("ice cream", not "ice_cream").
  std::optional<int> find_concept(std::string_view normalized_surface) const;

  const std::vector<Triple>& triples() const { return triples_; }
  /// Relation labels collapsed, duplicates removed, sorted by (head, tail).
  const std::vector<std::pair<int, int>>& collapsed_edges() const { return collapsed_; }
  /// Sorted unique neighbor ids, edge direction ignored.
  const std::vector<int>& undirected_neighbors(int id) const;

  /// Normalized surfaces in id order (used for matching).
  const std::vector<std::string>& normalized_surfaces() const { return normalized_; }

  /// Vocab index: normalized surface -> concept ids (several raw surfaces
  /// can normalize to the same string).
  const std::unordered_map<std::string, std::vector<int>>& vocab() const { return vocab_; }
  /// Ids of concepts whose normalized surface is a single token.
  const std::vector<int>& single_token_concepts() const { return single_token_; }

 private:
  int intern(const std::string& raw_surface);
  void finalize();

  std::vector<std::string> surfaces_;    // id -> surface form as loaded (lowercased)
  std::vector<std::string> normalized_;  // id -> normalized surface
  std::unordered_map<std::string, int> by_surface_;
  std::unordered_map<std::string, std::vector<int>> vocab_;
  std::vector<int> single_token_;
  std::vector<Triple> triples_;
  std::vector<std::pair<int, int>> collapsed_;
  std::vector<std::vector<int>> undirected_;
};

/// Question-related KG fragment: the linked seed concepts plus every bridge
/// concept on a 2-hop path between two distinct seeds. Edges are the KG
/// edges induced on the node set, direction preserved, relation labels
/// collapsed. All three vectors are sorted.
struct Subgraph {
  std::vector<int> nodes;
  std::vector<int> seeds;
  std::vector<std::pair<int, int>> edges;
};

/// Concepts mentioned by the claim. Single-token concepts match as
/// substrings of the normalized claim (which catches simple inflections
/// like "whales" for "whale"); multiword concepts must align to whole
/// token n-grams (n <= 4). A shorter match whose span lies inside an
/// accepted longer match is suppressed.
std::set<int> link_entities(const std::string& claim, const KnowledgeGraph& kg);

Subgraph retrieve_subgraph(const KnowledgeGraph& kg, const std::set<int>& seeds);

/// Keeps all seeds plus the best bridges when the subgraph exceeds
/// max_nodes. Bridges rank by (distinct seed pairs bridged desc, id asc);
/// edges are re-induced on the surviving nodes.
Subgraph cap_subgraph(const KnowledgeGraph& kg, const Subgraph& sub, std::size_t max_nodes);

}  // namespace factweave

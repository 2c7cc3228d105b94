#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "factweave/fact_index.hpp"
#include "factweave/kg.hpp"
#include "factweave/tensor.hpp"

namespace factweave {

enum class NodeKind { Question, Fact, Concept };

enum class RelationKind : std::size_t {
  ConceptToFact = 0,
  ConceptToConcept = 1,
  QuestionToFact = 2,
  QuestionToConcept = 3,
};

inline constexpr std::size_t kRelationCount = 4;

const char* relation_name(RelationKind r);  // "c2f", "c2c", "q2f", "q2c"

struct GraphNode {
  NodeKind kind = NodeKind::Question;
  std::string label;  // claim text, fact text, or concept surface
  long ref_id = -1;   // fact id / concept id; -1 for the question
};

/// Heterogeneous graph over one question node, k fact nodes and m concept
/// nodes, in that order. Question edges are bidirectional pairs to every
/// other node; concept-to-fact pairs exist iff the concept surface occurs
/// token-bounded in the fact text; concept-to-concept edges keep the KG
/// direction. Fact-to-fact edges never exist.
struct IntegralGraph {
  std::vector<GraphNode> nodes;
  std::size_t fact_count = 0;
  std::size_t concept_count = 0;
  /// Directed (source, target) lists per relation, in construction order.
  std::array<EdgeList, kRelationCount> adjacency;

  std::size_t size() const { return nodes.size(); }
  std::size_t knowledge_count() const { return fact_count + concept_count; }
  std::size_t edge_count() const;
  const EdgeList& edges(RelationKind r) const {
    return adjacency[static_cast<std::size_t>(r)];
  }
};

IntegralGraph build_integral_graph(const std::string& question, const Subgraph& sub,
                                   const KnowledgeGraph& kg, const std::vector<Fact>& facts);

/// Ablation rewire: same nodes, one edge family removed.
IntegralGraph drop_relation(const IntegralGraph& graph, RelationKind r);

/// Per-text encodings under the embedder contract; texts never interact.
struct EncodedTexts {
  Tensor question;  // 1 x d
  Tensor facts;     // k x d
};
EncodedTexts encode_texts(const std::string& question, const std::vector<Fact>& facts,
                          const Embedder& embedder);

/// C_graph = C_emb * W_c + b_c, recorded on the tape.
ValueId project_concepts(Tape& tape, ValueId c_emb, ValueId weight, ValueId bias);

/// N^(0) rows stacked as [question; facts; concepts]. Zero-row blocks are
/// skipped but widths must agree.
ValueId init_embeddings(Tape& tape, ValueId q_enc, ValueId f_enc, ValueId c_graph);

struct ConceptCoverage {
  std::size_t total = 0;
  std::size_t missing = 0;
};

/// Pre-trained concept vectors keyed by normalized surface form.
struct ConceptTable {
  std::size_t dim = 0;
  std::map<std::string, std::vector<double>> by_surface;
};

/// File is either the binary tensor container (one tensor per concept,
/// named by surface form) or TSV `surface<TAB>v1 v2 ...`.
ConceptTable load_concept_table(const std::filesystem::path& path);

/// Rows aligned to the subgraph concept order; concepts missing from the
/// table get the zero vector and are counted.
std::pair<Tensor, ConceptCoverage> concept_rows(const ConceptTable& table, const Subgraph& sub,
                                                const KnowledgeGraph& kg);

/// load_concept_table + concept_rows in one step.
std::pair<Tensor, ConceptCoverage> load_concept_embeddings(const std::filesystem::path& path,
                                                           const Subgraph& sub,
                                                           const KnowledgeGraph& kg);

/// Fallback when no pre-trained file is configured: hash-embed each concept
/// surface at width dim.
Tensor hash_concept_embeddings(const Subgraph& sub, const KnowledgeGraph& kg,
                               const Embedder& embedder);

}  // namespace factweave

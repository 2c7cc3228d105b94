#include "factweave/graph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "factweave/checkpoint.hpp"
#include "factweave/error.hpp"
#include "factweave/text.hpp"

namespace factweave {

const char* relation_name(RelationKind r) {
  switch (r) {
    case RelationKind::ConceptToFact:
      return "c2f";
    case RelationKind::ConceptToConcept:
      return "c2c";
    case RelationKind::QuestionToFact:
      return "q2f";
    case RelationKind::QuestionToConcept:
      return "q2c";
  }
  return "?";
}

std::size_t IntegralGraph::edge_count() const {
  std::size_t n = 0;
  for (const EdgeList& e : adjacency) n += e.size();
  return n;
}

IntegralGraph build_integral_graph(const std::string& question, const Subgraph& sub,
                                   const KnowledgeGraph& kg, const std::vector<Fact>& facts) {
  IntegralGraph g;
  g.fact_count = facts.size();
  g.concept_count = sub.nodes.size();

  g.nodes.push_back(GraphNode{NodeKind::Question, question, -1});
  for (const Fact& f : facts) g.nodes.push_back(GraphNode{NodeKind::Fact, f.text, f.id});
  // Subgraph nodes are sorted by concept id already; that fixes the block order.
  std::map<int, std::size_t> concept_index;
  for (int cid : sub.nodes) {
    concept_index[cid] = g.nodes.size();
    g.nodes.push_back(
        GraphNode{NodeKind::Concept, kg.surface(cid), static_cast<long>(cid)});
  }

  const std::size_t k = g.fact_count;
  auto fact_node = [&](std::size_t i) { return 1 + i; };

  // c2f: bidirectional pair iff the concept occurs token-bounded in the fact.
  auto& c2f = g.adjacency[static_cast<std::size_t>(RelationKind::ConceptToFact)];
  std::vector<std::vector<std::string>> fact_tokens(k);
  for (std::size_t i = 0; i < k; ++i) fact_tokens[i] = tokenize(facts[i].text);
  for (int cid : sub.nodes) {
    std::vector<std::string> phrase =
        tokenize(kg.normalized_surfaces()[static_cast<std::size_t>(cid)]);
    for (std::size_t i = 0; i < k; ++i) {
      if (contains_token_bounded(fact_tokens[i], phrase)) {
        c2f.emplace_back(concept_index[cid], fact_node(i));
        c2f.emplace_back(fact_node(i), concept_index[cid]);
      }
    }
  }

  // c2c: KG direction only, never symmetrized.
  auto& c2c = g.adjacency[static_cast<std::size_t>(RelationKind::ConceptToConcept)];
  for (const auto& [h, t] : sub.edges) c2c.emplace_back(concept_index[h], concept_index[t]);

  // q2f / q2c: the question pairs with every other node.
  auto& q2f = g.adjacency[static_cast<std::size_t>(RelationKind::QuestionToFact)];
  for (std::size_t i = 0; i < k; ++i) {
    q2f.emplace_back(0, fact_node(i));
    q2f.emplace_back(fact_node(i), 0);
  }
  auto& q2c = g.adjacency[static_cast<std::size_t>(RelationKind::QuestionToConcept)];
  for (int cid : sub.nodes) {
    q2c.emplace_back(0, concept_index[cid]);
    q2c.emplace_back(concept_index[cid], 0);
  }
  return g;
}

IntegralGraph drop_relation(const IntegralGraph& graph, RelationKind r) {
  IntegralGraph out = graph;
  out.adjacency[static_cast<std::size_t>(r)].clear();
  return out;
}

EncodedTexts encode_texts(const std::string& question, const std::vector<Fact>& facts,
                          const Embedder& embedder) {
  const std::size_t d = embedder.dim();
  EncodedTexts out;
  out.question = Tensor::row(embedder.embed(question));
  std::vector<double> rows;
  rows.reserve(facts.size() * d);
  for (const Fact& f : facts) {
    std::vector<double> v = embedder.embed(f.text);
    rows.insert(rows.end(), v.begin(), v.end());
  }
  out.facts = Tensor({facts.size(), d}, std::move(rows));
  return out;
}

ValueId project_concepts(Tape& tape, ValueId c_emb, ValueId weight, ValueId bias) {
  return tape.add_rowvec(tape.matmul(c_emb, weight), bias);
}

ValueId init_embeddings(Tape& tape, ValueId q_enc, ValueId f_enc, ValueId c_graph) {
  const std::size_t d = tape.value(q_enc).cols();
  for (ValueId part : {f_enc, c_graph}) {
    if (tape.value(part).cols() != d && tape.value(part).rows() > 0) {
      throw DimensionError("init_embeddings width mismatch: " + tape.value(part).shape_str() +
                           " vs width " + std::to_string(d));
    }
  }
  std::vector<ValueId> parts{q_enc};
  if (tape.value(f_enc).rows() > 0) parts.push_back(f_enc);
  if (tape.value(c_graph).rows() > 0) parts.push_back(c_graph);
  return tape.concat_rows(parts);
}

ConceptTable load_concept_table(const std::filesystem::path& path) {
  ConceptTable table;

  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open concept embeddings file: " + path.string());
  char magic[4] = {0, 0, 0, 0};
  probe.read(magic, 4);
  probe.close();

  if (std::string_view(magic, 4) == "DCKR") {
    for (const auto& [name, tensor] : load_checkpoint(path)) {
      if (tensor.numel() == 0) throw ParseError("empty concept vector for '" + name + "'");
      if (table.dim == 0) table.dim = tensor.numel();
      if (tensor.numel() != table.dim) {
        throw ParseError("concept vector width mismatch for '" + name + "': " +
                         std::to_string(tensor.numel()) + " vs " + std::to_string(table.dim));
      }
      table.by_surface[normalize_surface(name)] = tensor.data();
    }
  } else {
    std::ifstream is(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      std::size_t tab = line.find('\t');
      if (tab == std::string::npos) {
        throw ParseError("malformed concept embedding at " + path.string() + ":" +
                         std::to_string(line_no));
      }
      std::istringstream vs(line.substr(tab + 1));
      std::vector<double> row;
      double v;
      while (vs >> v) row.push_back(v);
      if (!vs.eof() || row.empty()) {
        throw ParseError("bad concept vector at " + path.string() + ":" +
                         std::to_string(line_no));
      }
      if (table.dim == 0) table.dim = row.size();
      if (row.size() != table.dim) {
        throw ParseError("concept vector width mismatch at " + path.string() + ":" +
                         std::to_string(line_no));
      }
      table.by_surface[normalize_surface(line.substr(0, tab))] = std::move(row);
    }
  }
  if (table.dim == 0) {
    throw ParseError("concept embeddings file holds no vectors: " + path.string());
  }
  return table;
}

std::pair<Tensor, ConceptCoverage> concept_rows(const ConceptTable& table, const Subgraph& sub,
                                                const KnowledgeGraph& kg) {
  ConceptCoverage cov;
  cov.total = sub.nodes.size();
  std::vector<double> data;
  data.reserve(sub.nodes.size() * table.dim);
  for (int cid : sub.nodes) {
    const std::string& key = kg.normalized_surfaces()[static_cast<std::size_t>(cid)];
    auto it = table.by_surface.find(key);
    if (it == table.by_surface.end()) {
      ++cov.missing;
      data.insert(data.end(), table.dim, 0.0);
    } else {
      data.insert(data.end(), it->second.begin(), it->second.end());
    }
  }
  return {Tensor({sub.nodes.size(), table.dim}, std::move(data)), cov};
}

std::pair<Tensor, ConceptCoverage> load_concept_embeddings(const std::filesystem::path& path,
                                                           const Subgraph& sub,
                                                           const KnowledgeGraph& kg) {
  return concept_rows(load_concept_table(path), sub, kg);
}

Tensor hash_concept_embeddings(const Subgraph& sub, const KnowledgeGraph& kg,
                               const Embedder& embedder) {
  const std::size_t dim = embedder.dim();
  std::vector<double> data;
  data.reserve(sub.nodes.size() * dim);
  for (int cid : sub.nodes) {
    std::vector<double> v =
        embedder.embed(kg.normalized_surfaces()[static_cast<std::size_t>(cid)]);
    data.insert(data.end(), v.begin(), v.end());
  }
  return Tensor({sub.nodes.size(), dim}, std::move(data));
}

}  // namespace factweave

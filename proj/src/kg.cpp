#include "factweave/kg.hpp"

#include <algorithm>
#include <limits>
#include <cctype>
#include <fstream>
#include <iostream>
#include <map>
#include <unordered_set>

#include "factweave/error.hpp"
#include "factweave/text.hpp"

namespace factweave {

namespace {

std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

int KnowledgeGraph::intern(const std::string& raw_surface) {
  std::string surface = lowercase(raw_surface);
  auto it = by_surface_.find(surface);
  if (it != by_surface_.end()) return it->second;
  int id = static_cast<int>(surfaces_.size());
  by_surface_.emplace(surface, id);
  normalized_.push_back(normalize_surface(surface));
  surfaces_.push_back(std::move(surface));
  return id;
}

void KnowledgeGraph::finalize() {
  vocab_.clear();
  single_token_.clear();
  for (std::size_t id = 0; id < normalized_.size(); ++id) {
    if (normalized_[id].empty()) continue;
    vocab_[normalized_[id]].push_back(static_cast<int>(id));
    if (normalized_[id].find(' ') == std::string::npos) {
      single_token_.push_back(static_cast<int>(id));
    }
  }

  std::set<std::pair<int, int>> edge_set;
  for (const Triple& t : triples_) edge_set.emplace(t.head, t.tail);
  collapsed_.assign(edge_set.begin(), edge_set.end());

  undirected_.assign(surfaces_.size(), {});
  for (const auto& [h, t] : collapsed_) {
    undirected_[static_cast<std::size_t>(h)].push_back(t);
    if (h != t) undirected_[static_cast<std::size_t>(t)].push_back(h);
  }
  for (auto& nb : undirected_) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
}

KnowledgeGraph KnowledgeGraph::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open knowledge graph file: " + path.string());

  KnowledgeGraph kg;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  std::size_t parsed = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    std::size_t tab1 = line.find('\t');
    std::size_t tab2 = (tab1 == std::string::npos) ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos) {
      throw ParseError("malformed triple at " + path.string() + ":" + std::to_string(line_no) +
                       " (expected head<TAB>relation<TAB>tail)");
    }
    std::string head = line.substr(0, tab1);
    std::string rel = line.substr(tab1 + 1, tab2 - tab1 - 1);
    std::string tail = line.substr(tab2 + 1);
    if (head.empty() || rel.empty() || tail.empty()) {
      throw ParseError("empty field in triple at " + path.string() + ":" +
                       std::to_string(line_no));
    }
    std::string key = lowercase(head) + "\t" + lowercase(rel) + "\t" + lowercase(tail);
    if (!seen.insert(key).second) continue;  // exact duplicate

    Triple t;
    t.head = kg.intern(head);
    t.relation = lowercase(rel);
    t.tail = kg.intern(tail);
    kg.triples_.push_back(std::move(t));
    ++parsed;
  }
  if (parsed == 0) {
    std::cerr << "warning: knowledge graph file " << path.string() << " holds no triples\n";
  }
  kg.finalize();
  return kg;
}

KnowledgeGraph KnowledgeGraph::from_triples(
    const std::vector<std::array<std::string, 3>>& triples) {
  KnowledgeGraph kg;
  std::unordered_set<std::string> seen;
  for (const auto& [head, rel, tail] : triples) {
    std::string key = lowercase(head) + "\t" + lowercase(rel) + "\t" + lowercase(tail);
    if (!seen.insert(key).second) continue;
    Triple t;
    t.head = kg.intern(head);
    t.relation = lowercase(rel);
    t.tail = kg.intern(tail);
    kg.triples_.push_back(std::move(t));
  }
  kg.finalize();
  return kg;
}

std::optional<int> KnowledgeGraph::find_concept(std::string_view normalized_surface) const {
  auto it = vocab_.find(std::string(normalized_surface));
  if (it == vocab_.end() || it->second.empty()) return std::nullopt;
  return it->second.front();
}

const std::vector<int>& KnowledgeGraph::undirected_neighbors(int id) const {
  return undirected_.at(static_cast<std::size_t>(id));
}

// --------------------------------------------------------------------------
// Entity linking

namespace {

struct Match {
  std::size_t begin;
  std::size_t end;
  int concept_id;
  std::size_t len() const { return end - begin; }
};

}  // namespace

std::set<int> link_entities(const std::string& claim, const KnowledgeGraph& kg) {
  NormalizedText text = normalize_with_spans(claim);
  if (text.joined.empty()) return {};

  std::vector<Match> matches;
  // Multiword concepts: exact token n-grams, n <= 4, through the vocab index.
  for (std::size_t n = 2; n <= 4 && n <= text.tokens.size(); ++n) {
    for (std::size_t i = 0; i + n <= text.tokens.size(); ++i) {
      std::string gram = text.joined.substr(text.tokens[i].begin,
                                            text.tokens[i + n - 1].end - text.tokens[i].begin);
      auto it = kg.vocab().find(gram);
      if (it == kg.vocab().end()) continue;
      for (int id : it->second) {
        matches.push_back(Match{text.tokens[i].begin, text.tokens[i + n - 1].end, id});
      }
    }
  }
  // Single-token concepts: substring occurrences. The pattern holds no
  // space, so a hit never spans a token boundary; matching inside a token
  // catches simple inflections ("whales" links "whale").
  const auto& surfaces = kg.normalized_surfaces();
  for (int id : kg.single_token_concepts()) {
    const std::string& surf = surfaces[static_cast<std::size_t>(id)];
    std::size_t pos = 0;
    while ((pos = text.joined.find(surf, pos)) != std::string::npos) {
      matches.push_back(Match{pos, pos + surf.size(), id});
      ++pos;
    }
  }

  // Longest match first; a shorter match contained in an accepted span is
  // suppressed.
  std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
    if (a.len() != b.len()) return a.len() > b.len();
    if (a.begin != b.begin) return a.begin < b.begin;
    return a.concept_id < b.concept_id;
  });
  std::vector<Match> accepted;
  std::set<int> out;
  for (const Match& m : matches) {
    bool inside = false;
    for (const Match& a : accepted) {
      if (a.begin <= m.begin && m.end <= a.end && m.len() < a.len()) {
        inside = true;
        break;
      }
    }
    if (inside) continue;
    accepted.push_back(m);
    out.insert(m.concept_id);
  }
  return out;
}

// --------------------------------------------------------------------------
// Subgraph retrieval

namespace {

// Induce collapsed KG edges on a node set. collapsed_edges() is sorted by
// (head, tail), so per-head ranges come from binary search.
std::vector<std::pair<int, int>> induce_edges(const KnowledgeGraph& kg,
                                              const std::set<int>& nodes) {
  std::vector<std::pair<int, int>> out;
  const auto& edges = kg.collapsed_edges();
  for (int h : nodes) {
    auto lo = std::lower_bound(edges.begin(), edges.end(),
                               std::pair<int, int>{h, std::numeric_limits<int>::min()});
    for (auto it = lo; it != edges.end() && it->first == h; ++it) {
      if (nodes.count(it->second)) out.emplace_back(*it);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Subgraph retrieve_subgraph(const KnowledgeGraph& kg, const std::set<int>& seeds) {
  Subgraph sub;
  sub.seeds.assign(seeds.begin(), seeds.end());

  std::set<int> nodes(seeds.begin(), seeds.end());
  // A bridge sits on a 2-hop path between two distinct seeds, i.e. it is
  // adjacent (direction ignored) to at least two of them. Neighbor lists
  // are unique per seed, so each candidate counts one hit per adjacent seed.
  std::map<int, int> seed_adjacency;
  for (int s : seeds) {
    for (int nb : kg.undirected_neighbors(s)) {
      if (!seeds.count(nb)) ++seed_adjacency[nb];
    }
  }
  for (const auto& [cand, count] : seed_adjacency) {
    if (count >= 2) nodes.insert(cand);
  }
  sub.nodes.assign(nodes.begin(), nodes.end());
  sub.edges = induce_edges(kg, nodes);
  return sub;
}

Subgraph cap_subgraph(const KnowledgeGraph& kg, const Subgraph& sub, std::size_t max_nodes) {
  if (max_nodes < sub.seeds.size()) {
    throw ContractError("cap_subgraph: max_nodes " + std::to_string(max_nodes) +
                        " below seed count " + std::to_string(sub.seeds.size()));
  }
  if (sub.nodes.size() <= max_nodes) return sub;

  std::set<int> seed_set(sub.seeds.begin(), sub.seeds.end());
  struct Ranked {
    int id;
    std::size_t pairs;
  };
  std::vector<Ranked> bridges;
  for (int node : sub.nodes) {
    if (seed_set.count(node)) continue;
    std::size_t adj_seeds = 0;
    for (int nb : kg.undirected_neighbors(node)) {
      if (seed_set.count(nb)) ++adj_seeds;
    }
    // Distinct unordered seed pairs this node bridges.
    std::size_t pairs = adj_seeds >= 2 ? adj_seeds * (adj_seeds - 1) / 2 : 0;
    bridges.push_back(Ranked{node, pairs});
  }
  std::sort(bridges.begin(), bridges.end(), [](const Ranked& a, const Ranked& b) {
    if (a.pairs != b.pairs) return a.pairs > b.pairs;
    return a.id < b.id;
  });

  std::set<int> kept(seed_set);
  for (const Ranked& b : bridges) {
    if (kept.size() >= max_nodes) break;
    kept.insert(b.id);
  }

  Subgraph out;
  out.seeds = sub.seeds;
  out.nodes.assign(kept.begin(), kept.end());
  out.edges = induce_edges(kg, kept);
  return out;
}

}  // namespace factweave

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "factweave/checkpoint.hpp"
#include "factweave/error.hpp"
#include "factweave/graph.hpp"
#include "factweave/rng.hpp"
#include "factweave/text.hpp"

using namespace factweave;

namespace {

struct Fixture {
  KnowledgeGraph kg;
  Subgraph sub;
  std::vector<Fact> facts;
};

// Random concepts/facts over a tiny shared vocabulary so concept-in-fact
// matches actually happen.
Fixture random_fixture(Rng& rng) {
  const char* words[] = {"whale", "ocean", "soup",  "kitchen", "mammal",
                         "bread", "spoon", "water", "breathe", "harbor"};
  std::vector<std::array<std::string, 3>> triples;
  const std::size_t n_concepts = 1 + rng.uniform_index(8);
  for (std::size_t i = 0; i < n_concepts; ++i) {
    triples.push_back({words[rng.uniform_index(10)], "relatedto", words[rng.uniform_index(10)]});
  }
  Fixture fx;
  fx.kg = KnowledgeGraph::from_triples(triples);

  std::set<int> seeds;
  for (std::size_t i = 0; i < 2 && fx.kg.concept_count() > 0; ++i) {
    seeds.insert(static_cast<int>(rng.uniform_index(fx.kg.concept_count())));
  }
  fx.sub = retrieve_subgraph(fx.kg, seeds);

  const std::size_t n_facts = rng.uniform_index(5);
  for (std::size_t i = 0; i < n_facts; ++i) {
    std::string text;
    const std::size_t len = 3 + rng.uniform_index(6);
    for (std::size_t w = 0; w < len; ++w) {
      if (w) text += " ";
      text += words[rng.uniform_index(10)];
    }
    fx.facts.push_back(Fact{static_cast<long>(i), text});
  }
  return fx;
}

}  // namespace

TEST_CASE("concepts captured in a fact get bidirectional c2f edges") {
  KnowledgeGraph kg = KnowledgeGraph::from_triples({{"soup", "isa", "food"}});
  const int soup = *kg.find_concept("soup");
  Subgraph sub;
  sub.nodes = {soup};
  sub.seeds = {soup};

  std::vector<Fact> facts{{7, "soup is a mostly liquid dish"}};
  IntegralGraph g = build_integral_graph("is soup a liquid", sub, kg, facts);

  REQUIRE(g.size() == 3);  // question + 1 fact + 1 concept
  const EdgeList& c2f = g.edges(RelationKind::ConceptToFact);
  REQUIRE(c2f.size() == 2);
  CHECK(c2f[0] == std::pair<std::size_t, std::size_t>{2, 1});
  CHECK(c2f[1] == std::pair<std::size_t, std::size_t>{1, 2});
}

TEST_CASE("question connects to every fact and concept, both directions") {
  std::vector<std::array<std::string, 3>> triples;
  for (int i = 0; i < 10; ++i) {
    triples.push_back({"c" + std::to_string(i), "relatedto", "c" + std::to_string((i + 1) % 10)});
  }
  KnowledgeGraph kg = KnowledgeGraph::from_triples(triples);
  Subgraph sub;
  for (int i = 0; i < 10; ++i) sub.nodes.push_back(i);
  std::vector<Fact> facts;
  for (long i = 0; i < 5; ++i) facts.push_back(Fact{i, "fact number " + std::to_string(i)});

  IntegralGraph g = build_integral_graph("some question", sub, kg, facts);
  CHECK(g.size() == 16);
  CHECK(g.edges(RelationKind::QuestionToFact).size() == 2 * 5);
  CHECK(g.edges(RelationKind::QuestionToConcept).size() == 2 * 10);
}

TEST_CASE("degenerate graph: no facts, no concepts") {
  KnowledgeGraph kg;
  IntegralGraph g = build_integral_graph("lonely question", Subgraph{}, kg, {});
  CHECK(g.size() == 1);
  CHECK(g.edge_count() == 0);
  CHECK(g.knowledge_count() == 0);
}

TEST_CASE("c2c edges keep KG direction and are not symmetrized") {
  KnowledgeGraph kg = KnowledgeGraph::from_triples({{"a", "r", "b"}, {"b", "r", "c"}});
  const int a = *kg.find_concept("a"), c = *kg.find_concept("c");
  Subgraph sub = retrieve_subgraph(kg, {a, c});
  IntegralGraph g = build_integral_graph("q", sub, kg, {});

  const EdgeList& c2c = g.edges(RelationKind::ConceptToConcept);
  REQUIRE(c2c.size() == 2);
  // Node order: question, then concepts a(1) b(2) c(3).
  CHECK(c2c[0] == std::pair<std::size_t, std::size_t>{1, 2});
  CHECK(c2c[1] == std::pair<std::size_t, std::size_t>{2, 3});
}

TEST_CASE("graph invariants hold on random fixtures") {
  Rng rng(1234);
  for (int trial = 0; trial < 100; ++trial) {
    Fixture fx = random_fixture(rng);
    IntegralGraph g = build_integral_graph("whale soup question", fx.sub, fx.kg, fx.facts);

    const std::size_t k = fx.facts.size(), m = fx.sub.nodes.size();
    CHECK(g.size() == 1 + k + m);
    CHECK(g.edges(RelationKind::QuestionToFact).size() == 2 * k);
    CHECK(g.edges(RelationKind::QuestionToConcept).size() == 2 * m);

    // c2f soundness and completeness against an exhaustive scan.
    std::set<std::pair<std::size_t, std::size_t>> expected;
    for (std::size_t ci = 0; ci < m; ++ci) {
      auto phrase = tokenize(
          fx.kg.normalized_surfaces()[static_cast<std::size_t>(fx.sub.nodes[ci])]);
      for (std::size_t fi = 0; fi < k; ++fi) {
        if (contains_token_bounded(tokenize(fx.facts[fi].text), phrase)) {
          expected.emplace(1 + k + ci, 1 + fi);
          expected.emplace(1 + fi, 1 + k + ci);
        }
      }
    }
    const EdgeList& c2f = g.edges(RelationKind::ConceptToFact);
    CHECK(std::set<std::pair<std::size_t, std::size_t>>(c2f.begin(), c2f.end()) == expected);

    // No edge escapes the node range; no fact-fact pair under any relation.
    for (std::size_t r = 0; r < kRelationCount; ++r) {
      for (const auto& [s, t] : g.adjacency[r]) {
        CHECK(s < g.size());
        CHECK(t < g.size());
        const bool s_fact = g.nodes[s].kind == NodeKind::Fact;
        const bool t_fact = g.nodes[t].kind == NodeKind::Fact;
        CHECK(!(s_fact && t_fact));
      }
    }
  }
}

TEST_CASE("graph construction is a pure function of its inputs") {
  Rng rng(55);
  Fixture fx = random_fixture(rng);
  IntegralGraph g1 = build_integral_graph("whale question", fx.sub, fx.kg, fx.facts);
  IntegralGraph g2 = build_integral_graph("whale question", fx.sub, fx.kg, fx.facts);
  CHECK(g1.size() == g2.size());
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    CHECK(g1.adjacency[r] == g2.adjacency[r]);
  }
}

TEST_CASE("project_concepts: identity, zero input, random oracle") {
  Rng rng(77);

  // Identity weights pass C_emb through.
  {
    Tape tape;
    std::vector<double> eye(4 * 4, 0.0);
    for (int i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
    ValueId c = tape.constant(Tensor::matrix(2, 4, {1, 2, 3, 4, 5, 6, 7, 8}));
    ValueId w = tape.constant(Tensor({4, 4}, eye));
    ValueId b = tape.constant(Tensor::zeros({1, 4}));
    const Tensor& out = tape.value(project_concepts(tape, c, w, b));
    CHECK(out.data() == std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
  }

  // Zero input leaves only the bias, broadcast per row.
  {
    Tape tape;
    ValueId c = tape.constant(Tensor::zeros({3, 2}));
    ValueId w = tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
    ValueId b = tape.constant(Tensor::row({0.5, -0.25}));
    const Tensor& out = tape.value(project_concepts(tape, c, w, b));
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(out.at(i, 0) == 0.5);
      CHECK(out.at(i, 1) == -0.25);
    }
  }

  // Random case against a naive matmul + broadcast oracle.
  {
    const std::size_t m = 6, dc = 10, d = 8;
    std::vector<double> cd(m * dc), wd(dc * d), bd(d);
    for (double& v : cd) v = rng.uniform(-1, 1);
    for (double& v : wd) v = rng.uniform(-1, 1);
    for (double& v : bd) v = rng.uniform(-1, 1);

    std::vector<double> expected(m * d, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t t = 0; t < dc; ++t) expected[i * d + j] += cd[i * dc + t] * wd[t * d + j];
        expected[i * d + j] += bd[j];
      }

    Tape tape;
    ValueId out = project_concepts(tape, tape.constant(Tensor({m, dc}, cd)),
                                   tape.constant(Tensor({dc, d}, wd)),
                                   tape.constant(Tensor({1, d}, bd)));
    for (std::size_t i = 0; i < m * d; ++i) {
      CHECK(tape.value(out).data()[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("init_embeddings stacks blocks in fixed order") {
  Tape tape;
  ValueId q = tape.constant(Tensor::row({1, 2, 3, 4}));
  ValueId f = tape.constant(Tensor::matrix(2, 4, {5, 6, 7, 8, 9, 10, 11, 12}));
  ValueId c = tape.constant(Tensor::matrix(3, 4, std::vector<double>(12, -1.0)));
  ValueId n0 = init_embeddings(tape, q, f, c);

  const Tensor& out = tape.value(n0);
  REQUIRE(out.rows() == 6);
  REQUIRE(out.cols() == 4);
  CHECK(out.at(0, 0) == 1.0);
  CHECK(out.at(1, 0) == 5.0);
  CHECK(out.at(3, 0) == -1.0);

  // Row slices round-trip to their sources bit-exactly.
  CHECK(tape.value(tape.slice_rows(n0, 0, 1)).data() == tape.value(q).data());
  CHECK(tape.value(tape.slice_rows(n0, 1, 3)).data() == tape.value(f).data());
  CHECK(tape.value(tape.slice_rows(n0, 3, 6)).data() == tape.value(c).data());
}

TEST_CASE("init_embeddings handles empty fact and concept blocks") {
  Tape tape;
  ValueId q = tape.constant(Tensor::row({1, 2}));
  ValueId f = tape.constant(Tensor({0, 2}, {}));
  ValueId c = tape.constant(Tensor({0, 2}, {}));
  const Tensor& out = tape.value(init_embeddings(tape, q, f, c));
  CHECK(out.rows() == 1);
  CHECK(out.data() == std::vector<double>{1, 2});
}

TEST_CASE("encode_texts is per-text and deterministic") {
  HashEmbedder embedder(16, 3);
  std::vector<Fact> facts{{0, "soup is warm"}, {1, "soup is warm"}};
  EncodedTexts enc = encode_texts("a question", facts, embedder);
  CHECK(enc.question.rows() == 1);
  CHECK(enc.facts.rows() == 2);
  // Identical texts embed to identical rows.
  for (std::size_t j = 0; j < 16; ++j) CHECK(enc.facts.at(0, j) == enc.facts.at(1, j));
  // Rows equal the per-text embedder output exactly.
  std::vector<double> direct = embedder.embed("soup is warm");
  for (std::size_t j = 0; j < 16; ++j) CHECK(enc.facts.at(0, j) == direct[j]);

  EncodedTexts none = encode_texts("a question", {}, embedder);
  CHECK(none.facts.rows() == 0);
  CHECK(none.question.cols() == 16);
}

TEST_CASE("concept embedding files load with zero-fill for missing surfaces") {
  namespace fs = std::filesystem;
  KnowledgeGraph kg = KnowledgeGraph::from_triples({{"whale", "isa", "mammal"},
                                                    {"ocean", "isa", "place"}});
  Subgraph sub;
  sub.nodes = {*kg.find_concept("whale"), *kg.find_concept("mammal"), *kg.find_concept("ocean")};

  const fs::path tsv = fs::temp_directory_path() / "fw_concepts.tsv";
  {
    std::ofstream os(tsv, std::ios::trunc);
    os << "whale\t1.0 2.0\n";
    os << "ocean\t-1.0 0.5\n";
  }
  auto [emb, coverage] = load_concept_embeddings(tsv, sub, kg);
  CHECK(emb.rows() == 3);
  CHECK(emb.cols() == 2);
  CHECK(coverage.total == 3);
  CHECK(coverage.missing == 1);  // mammal
  CHECK(emb.at(0, 0) == 1.0);    // whale row
  // mammal row zero-filled; node order is sorted by concept id.
  const std::size_t mammal_row = 1;
  CHECK(emb.at(mammal_row, 0) == 0.0);
  CHECK(emb.at(mammal_row, 1) == 0.0);

  // Binary container path: one tensor per concept, named by surface.
  const fs::path bin = fs::temp_directory_path() / "fw_concepts.bin";
  std::map<std::string, Tensor> tensors;
  tensors.emplace("whale", Tensor::row({9.0, 8.0}));
  tensors.emplace("mammal", Tensor::row({7.0, 6.0}));
  tensors.emplace("ocean", Tensor::row({5.0, 4.0}));
  save_checkpoint(bin, tensors);
  auto [emb2, cov2] = load_concept_embeddings(bin, sub, kg);
  CHECK(cov2.missing == 0);
  CHECK(emb2.at(0, 0) == 9.0);

  // Corrupt file -> ParseError.
  {
    std::ofstream os(tsv, std::ios::trunc);
    os << "whale\tnot numbers\n";
  }
  CHECK_THROWS_AS(load_concept_embeddings(tsv, sub, kg), ParseError);

  fs::remove(tsv);
  fs::remove(bin);
}

TEST_CASE("drop_relation clears exactly one family") {
  KnowledgeGraph kg = KnowledgeGraph::from_triples({{"a", "r", "b"}});
  Subgraph sub = retrieve_subgraph(kg, {*kg.find_concept("a"), *kg.find_concept("b")});
  std::vector<Fact> facts{{0, "about a and b"}};
  IntegralGraph g = build_integral_graph("a question about a", sub, kg, facts);
  REQUIRE(g.edges(RelationKind::ConceptToConcept).size() == 1);

  IntegralGraph dropped = drop_relation(g, RelationKind::ConceptToConcept);
  CHECK(dropped.edges(RelationKind::ConceptToConcept).empty());
  CHECK(dropped.edges(RelationKind::QuestionToFact) == g.edges(RelationKind::QuestionToFact));
  CHECK(dropped.size() == g.size());
}

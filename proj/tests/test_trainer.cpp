#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "factweave/error.hpp"
#include "factweave/synth.hpp"
#include "factweave/trainer.hpp"

using namespace factweave;

namespace {

struct Bench {
  SynthBenchmark data;
  KnowledgeGraph kg;
  FactIndex facts;
};

// Index built with the same retrieval embedder the pipelines use
// (embedder_seed 17 throughout these tests).
Bench make_bench(std::uint64_t seed, std::size_t n_train, std::size_t n_dev = 0,
                 std::size_t n_test = 0) {
  Bench b;
  b.data = synth_xor_benchmark(seed, n_train, n_dev, n_test);
  b.kg = KnowledgeGraph::from_triples(b.data.triples);
  b.facts = FactIndex::build(b.data.facts, Pipeline::make_retrieval_embedder(128, 17));
  return b;
}

ModelConfig small_config() {
  ModelConfig mc;
  mc.d = 16;
  mc.d_c = 12;
  mc.heads = 4;
  mc.layers = 2;
  mc.k = 2;
  mc.dropout = 0.0;
  return mc;
}

}  // namespace

TEST_CASE("forward with both sources ablated reduces to the lone question node") {
  Bench b = make_bench(1, 4);
  ModelConfig mc = small_config();
  mc.no_facts = true;
  mc.no_kg = true;
  Pipeline pipeline(b.kg, b.facts, mc, 17);

  PreparedClaim prepared = pipeline.prepare(b.data.train.front());
  CHECK(prepared.graph.size() == 1);
  CHECK(prepared.graph.edge_count() == 0);

  Rng rng(5);
  ModelParams params = init_params(mc, rng);
  Tape tape;
  RegisteredParams reg = register_params(tape, params);
  ForwardResult fwd = forward_prepared(tape, prepared, reg, mc, nullptr, std::nullopt);

  // K_a must be the zero vector: logits equal predict(q_enc, 0, q_enc_L).
  Tape manual;
  RegisteredParams reg2 = register_params(manual, params);
  ValueId q = manual.constant(prepared.q_enc);
  std::vector<RgcnLayerIds> layers;
  for (std::size_t l = 0; l < mc.layers; ++l) {
    RgcnLayerIds layer;
    layer.self_weight = reg2.at(rgcn_self_name(l));
    layers.push_back(layer);
  }
  ValueId q_final = rgcn_forward(manual, q, layers, 1, nullptr);
  MlpIds mlp{reg2.at(kMlpW1), reg2.at(kMlpB1), reg2.at(kMlpW2), reg2.at(kMlpB2)};
  ValueId logits =
      predict(manual, q, manual.constant(Tensor::zeros({1, mc.d})), q_final, mlp);
  CHECK(tape.value(fwd.logits).data() == manual.value(logits).data());
}

TEST_CASE("no_edge_types equals a one-relation R-GCN with the shared weight") {
  Bench b = make_bench(2, 4);
  ModelConfig merged = small_config();
  merged.no_edge_types = true;
  Pipeline pipeline(b.kg, b.facts, merged, 17);

  Rng rng(6);
  ModelParams params = init_params(merged, rng);
  const Claim& claim = b.data.train.front();
  PreparedClaim prepared = pipeline.prepare(claim);

  Tape tape;
  RegisteredParams reg = register_params(tape, params);
  ForwardResult fwd = forward_prepared(tape, prepared, reg, merged, nullptr, claim.label);

  // Oracle: run the generic machinery over a graph whose edges were merged
  // by hand into a single family with one tied weight.
  Tape manual;
  RegisteredParams reg2 = register_params(manual, params);
  ValueId q = manual.constant(prepared.q_enc);
  ValueId f = manual.constant(prepared.f_enc);
  ValueId c = manual.constant(prepared.c_emb);
  ValueId c_graph =
      project_concepts(manual, c, reg2.at(kConceptProjWeight), reg2.at(kConceptProjBias));
  ValueId n0 = init_embeddings(manual, q, f, c_graph);

  EdgeList merged_edges;
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    merged_edges.insert(merged_edges.end(), prepared.graph.adjacency[r].begin(),
                        prepared.graph.adjacency[r].end());
  }
  auto merged_ptr = std::make_shared<const EdgeList>(std::move(merged_edges));
  std::vector<RgcnLayerIds> layers;
  for (std::size_t l = 0; l < merged.layers; ++l) {
    RgcnLayerIds layer;
    layer.self_weight = reg2.at(rgcn_self_name(l));
    layer.relations.push_back({reg2.at(rgcn_shared_weight_name(l)), merged_ptr});
    layers.push_back(layer);
  }
  ValueId n_final = rgcn_forward(manual, n0, layers, prepared.graph.size(), nullptr);
  ValueId q_final = manual.slice_rows(n_final, 0, 1);
  ValueId knowledge = manual.slice_rows(n_final, 1, prepared.graph.size());
  MhaIds mha;
  for (std::size_t t = 0; t < merged.heads; ++t) {
    mha.heads.push_back({reg2.at(mha_head_name(t, 'q')), reg2.at(mha_head_name(t, 'k')),
                         reg2.at(mha_head_name(t, 'v'))});
  }
  mha.out = reg2.at(kMhaOut);
  PoolResult pool = mha_pool(manual, q, knowledge, mha, {});
  MlpIds mlp{reg2.at(kMlpW1), reg2.at(kMlpB1), reg2.at(kMlpW2), reg2.at(kMlpB2)};
  ValueId logits = predict(manual, q, pool.pooled, q_final, mlp);

  CHECK(tape.value(fwd.logits).data() == manual.value(logits).data());
}

TEST_CASE("forward logits are bit-identical across runs") {
  Bench b = make_bench(3, 3);
  ModelConfig mc = small_config();
  Pipeline pipeline(b.kg, b.facts, mc, 17);
  Rng rng(44);
  ModelParams params = init_params(mc, rng);

  auto run = [&] {
    Tape tape;
    RegisteredParams reg = register_params(tape, params);
    ForwardResult fwd = forward_prepared(tape, pipeline.prepare(b.data.train[1]), reg, mc,
                                         nullptr, std::nullopt);
    return tape.value(fwd.logits).data();
  };
  CHECK(run() == run());
}

TEST_CASE("learning rate zero leaves parameters untouched") {
  Bench b = make_bench(4, 8, 4, 0);
  ModelConfig mc = small_config();
  Pipeline pipeline(b.kg, b.facts, mc, 17);

  TrainConfig tc;
  tc.lr = 0.0;
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.seed = 9;
  TrainResult result = train(pipeline, b.data.train, {}, tc);

  Rng rng(Rng::derive(tc.seed, 0x1717));
  ModelParams fresh = init_params(mc, rng);
  for (const auto& [name, tensor] : fresh.tensors) {
    CHECK(result.params.at(name).data() == tensor.data());
  }
}

TEST_CASE("one optimizer step reduces the loss on most seeds") {
  Bench b = make_bench(5, 16);
  ModelConfig mc = small_config();
  Pipeline pipeline(b.kg, b.facts, mc, 17);

  std::vector<PreparedClaim> prepared;
  for (const Claim& c : b.data.train) prepared.push_back(pipeline.prepare(c));

  auto mean_loss = [&](const ModelParams& params) {
    double total = 0.0;
    for (const PreparedClaim& pc : prepared) {
      Tape tape;
      RegisteredParams reg = register_params(tape, params);
      ForwardResult fwd = forward_prepared(tape, pc, reg, mc, nullptr, pc.claim.label);
      total += tape.value(fwd.loss).item();
    }
    return total / static_cast<double>(prepared.size());
  };

  int improved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(Rng::derive(seed, 0x1717));
    ModelParams params = init_params(mc, rng);
    const double before = mean_loss(params);

    // One full-batch Adam step at lr 1e-3.
    std::map<std::string, std::vector<double>> acc;
    for (const PreparedClaim& pc : prepared) {
      Tape tape;
      RegisteredParams reg = register_params(tape, params);
      ForwardResult fwd = forward_prepared(tape, pc, reg, mc, nullptr, pc.claim.label);
      for (auto& [name, grad] : named_grads(tape, fwd.loss, reg)) {
        auto& bucket = acc[name];
        if (bucket.empty()) bucket.assign(grad.numel(), 0.0);
        for (std::size_t i = 0; i < bucket.size(); ++i) {
          bucket[i] += grad.data()[i] / static_cast<double>(prepared.size());
        }
      }
    }
    std::map<std::string, Tensor> grads;
    for (auto& [name, data] : acc) {
      grads.emplace(name, Tensor(params.at(name).shape(), std::move(data)));
    }
    AdamOptimizer opt(1e-3, 0.0, 1);
    opt.step(params, grads);

    if (mean_loss(params) < before) ++improved;
  }
  CHECK(improved >= 9);
}

TEST_CASE("evaluate: exact accuracy, empty set rejected, recount oracle") {
  Bench b = make_bench(6, 12);
  ModelConfig mc = small_config();
  Pipeline pipeline(b.kg, b.facts, mc, 17);
  Rng rng(3);
  ModelParams params = init_params(mc, rng);

  EvalReport report = evaluate(pipeline, b.data.train, params);
  CHECK(report.total == 12);
  // Recount oracle over the prediction records.
  std::size_t recount = 0;
  for (const Prediction& p : report.predictions) {
    const int pred = p.logit1 > p.logit0 ? 1 : 0;
    CHECK(pred == p.pred);
    if (pred == p.label) ++recount;
  }
  CHECK(report.correct == recount);
  CHECK(report.accuracy == static_cast<double>(recount) / 12.0);

  CHECK_THROWS_AS(evaluate(pipeline, {}, params), ContractError);
}

TEST_CASE("synth generator self-audit") {
  SynthBenchmark bench = synth_xor_benchmark(123, 2000, 0, 0);
  REQUIRE(bench.meta.size() == 2000);

  // Single-source Bayes accuracy sits at 50% (+-3 points): the best
  // predictor from one bit picks the majority label per bit value.
  auto single_source_accuracy = [&](bool use_kg) {
    std::array<std::array<std::size_t, 2>, 2> counts{};  // [bit][label]
    for (std::size_t i = 0; i < bench.meta.size(); ++i) {
      const int bit = use_kg ? bench.meta[i].kg_bit : bench.meta[i].fact_bit;
      counts[bit][bench.train[i].label] += 1;
    }
    std::size_t best = std::max(counts[0][0], counts[0][1]) +
                       std::max(counts[1][0], counts[1][1]);
    return static_cast<double>(best) / static_cast<double>(bench.meta.size());
  };
  CHECK(single_source_accuracy(true) <= 0.53);
  CHECK(single_source_accuracy(false) <= 0.53);

  // Both sources decide the label exactly, by construction.
  for (std::size_t i = 0; i < bench.meta.size(); ++i) {
    CHECK((bench.meta[i].kg_bit ^ bench.meta[i].fact_bit) == bench.train[i].label);
  }

  // Label marginal close to 50/50.
  std::size_t positives = 0;
  for (const Claim& c : bench.train) positives += static_cast<std::size_t>(c.label);
  const double marginal = static_cast<double>(positives) / 2000.0;
  CHECK(marginal >= 0.47);
  CHECK(marginal <= 0.53);
}

TEST_CASE("synth retrieval: the claim's own fact ranks first") {
  Bench b = make_bench(7, 64);
  ModelConfig mc = small_config();
  Pipeline pipeline(b.kg, b.facts, mc, 17);
  for (const Claim& c : b.data.train) {
    PreparedClaim prepared = pipeline.prepare(c);
    REQUIRE(!prepared.retrieved.empty());
    // True facts sit at id 5 * claim, ahead of the decoys.
    CHECK(prepared.retrieved.front().id == 5 * c.id);

    // Constant subgraph shape: three seeds plus the hub, two c2c edges.
    CHECK(prepared.sub.nodes.size() == 4);
    CHECK(prepared.sub.edges.size() == 2);
    // The bridge endpoint flavor encodes the generator's KG bit.
    bool bridge_hits_beta = false;
    for (const auto& [h, t] : prepared.sub.edges) {
      if (b.kg.surface(h).rfind("hub_", 0) == 0) {
        bridge_hits_beta = b.kg.surface(t).rfind("beta_", 0) == 0;
      }
    }
    CHECK(static_cast<int>(bridge_hits_beta) == b.data.meta[c.id].kg_bit);
  }
}

TEST_CASE("finite_diff_check passes on a small prepared claim") {
  Bench b = make_bench(8, 2);
  ModelConfig mc = small_config();
  mc.d = 8;
  mc.d_c = 6;
  mc.heads = 2;
  Pipeline pipeline(b.kg, b.facts, mc, 17);
  Rng rng(21);
  ModelParams params = init_params(mc, rng);

  PreparedClaim prepared = pipeline.prepare(b.data.train.front());
  GradCheckReport report = finite_diff_check(prepared, params, mc, {}, 1e-5);
  CHECK(report.passed(1e-4));
  CHECK(report.entries.size() == params.tensors.size());
}

TEST_CASE("training diverges loudly instead of silently") {
  Bench b = make_bench(9, 8);
  ModelConfig mc = small_config();
  Pipeline pipeline(b.kg, b.facts, mc, 17);
  TrainConfig tc;
  tc.lr = 1e150;  // guaranteed overflow within a couple of steps
  tc.epochs = 30;
  tc.batch_size = 8;
  tc.seed = 2;
  CHECK_THROWS_AS(train(pipeline, b.data.train, {}, tc), NumericalError);
}

#include "factweave/model.hpp"

#include <algorithm>
#include <cmath>

#include "factweave/error.hpp"
#include "factweave/text.hpp"

namespace factweave {

void ModelConfig::validate() const {
  if (d == 0 || d_c == 0 || k == 0 || heads == 0) {
    throw ContractError("model config: d, d_c, k and heads must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ContractError("model config: dropout must lie in [0, 1)");
  }
  if ((pool == PoolKind::Mha) && d % heads != 0) {
    throw ContractError("model config: d = " + std::to_string(d) +
                        " must be divisible by heads = " + std::to_string(heads));
  }
}

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ContractError("missing parameter tensor '" + name + "'");
  return it->second;
}

std::string mha_head_name(std::size_t head, char which) {
  return "mha.h" + std::to_string(head) + "." + std::string(1, which);
}

namespace {

Tensor xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::vector<double> data(rows * cols);
  for (double& v : data) v = rng.uniform(-bound, bound);
  return Tensor({rows, cols}, std::move(data), /*requires_grad=*/true);
}

Tensor zero_bias(std::size_t cols) { return Tensor::zeros({1, cols}, /*requires_grad=*/true); }

}  // namespace

ModelParams init_params(const ModelConfig& config, Rng& rng) {
  config.validate();
  ModelParams p;
  const std::size_t d = config.d;

  p.tensors.emplace(kConceptProjWeight, xavier_uniform(config.d_c, d, rng));
  p.tensors.emplace(kConceptProjBias, zero_bias(d));

  for (std::size_t l = 0; l < config.layers; ++l) {
    if (config.no_edge_types) {
      p.tensors.emplace(rgcn_shared_weight_name(l), xavier_uniform(d, d, rng));
    } else {
      for (std::size_t r = 0; r < kRelationCount; ++r) {
        p.tensors.emplace(rgcn_weight_name(l, static_cast<RelationKind>(r)),
                          xavier_uniform(d, d, rng));
      }
    }
    p.tensors.emplace(rgcn_self_name(l), xavier_uniform(d, d, rng));
  }

  if (config.pool == PoolKind::Mha || config.pool == PoolKind::Attention) {
    const std::size_t h = (config.pool == PoolKind::Mha) ? config.heads : 1;
    const std::size_t dh = d / h;
    for (std::size_t t = 0; t < h; ++t) {
      p.tensors.emplace(mha_head_name(t, 'q'), xavier_uniform(d, dh, rng));
      p.tensors.emplace(mha_head_name(t, 'k'), xavier_uniform(d, dh, rng));
      p.tensors.emplace(mha_head_name(t, 'v'), xavier_uniform(d, dh, rng));
    }
    p.tensors.emplace(kMhaOut, xavier_uniform(h * dh, d, rng));
  }

  p.tensors.emplace(kMlpW1, xavier_uniform(3 * d, d, rng));
  p.tensors.emplace(kMlpB1, zero_bias(d));
  p.tensors.emplace(kMlpW2, xavier_uniform(d, 2, rng));
  p.tensors.emplace(kMlpB2, zero_bias(2));
  return p;
}

ValueId RegisteredParams::at(const std::string& name) const {
  auto it = ids.find(name);
  if (it == ids.end()) throw ContractError("parameter '" + name + "' not registered on tape");
  return it->second;
}

RegisteredParams register_params(Tape& tape, const ModelParams& params) {
  RegisteredParams reg;
  for (const auto& [name, tensor] : params.tensors) {
    reg.ids.emplace(name, tape.leaf(tensor));
  }
  return reg;
}

std::map<std::string, Tensor> named_grads(const Tape& tape, ValueId loss,
                                          const RegisteredParams& reg) {
  std::map<ValueId, Tensor> by_id = tape.backward(loss);
  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : reg.ids) {
    auto it = by_id.find(id);
    if (it != by_id.end()) out.emplace(name, it->second);
  }
  return out;
}

// --------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(const KnowledgeGraph& kg, const FactIndex& facts, const ModelConfig& config,
                   std::uint64_t embedder_seed)
    : kg_(kg), facts_(facts), config_(config) {
  config_.validate();
  text_embedder_ = std::make_unique<HashEmbedder>(config_.d, Rng::derive(embedder_seed, 1));
  const std::size_t retrieval_dim = facts_.dim() > 0 ? facts_.dim() : config_.d;
  retrieval_embedder_ =
      std::make_unique<HashEmbedder>(make_retrieval_embedder(retrieval_dim, embedder_seed));
  concept_embedder_ = std::make_unique<HashEmbedder>(config_.d_c, Rng::derive(embedder_seed, 3));
}

void Pipeline::set_concept_table(ConceptTable table) {
  if (table.dim != config_.d_c) {
    throw ContractError("concept table width " + std::to_string(table.dim) +
                        " does not match configured d_c " + std::to_string(config_.d_c));
  }
  concept_table_ = std::move(table);
}

PreparedClaim Pipeline::prepare(const Claim& claim) const {
  PreparedClaim out;
  out.claim = claim;

  if (!config_.no_kg) {
    out.seeds = link_entities(claim.text, kg_);
    out.sub = cap_subgraph(kg_, retrieve_subgraph(kg_, out.seeds), config_.max_nodes);
  }

  if (!config_.no_facts && facts_.size() > 0) {
    std::vector<double> q_vec = retrieval_embedder_->embed(claim.text);
    out.retrieved = facts_.top_k(q_vec, config_.k);
    for (const ScoredFact& sf : out.retrieved) out.facts.push_back(facts_.fact(sf.pos));
  }

  out.graph = build_integral_graph(claim.text, out.sub, kg_, out.facts);
  for (RelationKind r : config_.drop_relations) out.graph = drop_relation(out.graph, r);

  EncodedTexts enc = encode_texts(claim.text, out.facts, *text_embedder_);
  out.q_enc = std::move(enc.question);
  out.f_enc = std::move(enc.facts);

  if (concept_table_.has_value()) {
    auto [emb, cov] = concept_rows(*concept_table_, out.sub, kg_);
    out.c_emb = std::move(emb);
    out.coverage = cov;
  } else {
    out.c_emb = hash_concept_embeddings(out.sub, kg_, *concept_embedder_);
    out.coverage.total = out.sub.nodes.size();
  }

  for (std::size_t r = 0; r < kRelationCount; ++r) {
    out.edge_ptrs[r] = std::make_shared<const EdgeList>(out.graph.adjacency[r]);
  }
  EdgeList merged;
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    merged.insert(merged.end(), out.graph.adjacency[r].begin(), out.graph.adjacency[r].end());
  }
  out.merged_edges = std::make_shared<const EdgeList>(std::move(merged));
  return out;
}

std::vector<Tensor> make_dropout_masks(const PreparedClaim& prepared, const ModelConfig& config,
                                       Rng& rng) {
  std::vector<Tensor> masks;
  const std::size_t n = prepared.graph.size();
  const double keep = 1.0 - config.dropout;
  const double scale = 1.0 / keep;
  for (std::size_t l = 0; l < config.layers; ++l) {
    std::vector<double> data(n * config.d);
    for (double& v : data) v = rng.bernoulli(keep) ? scale : 0.0;
    masks.push_back(Tensor({n, config.d}, std::move(data)));
  }
  return masks;
}

namespace {

std::vector<RgcnLayerIds> build_rgcn_layers(const RegisteredParams& reg,
                                            const ModelConfig& config,
                                            const PreparedClaim& prepared) {
  std::vector<RgcnLayerIds> layers;
  for (std::size_t l = 0; l < config.layers; ++l) {
    RgcnLayerIds layer;
    layer.self_weight = reg.at(rgcn_self_name(l));
    if (config.no_edge_types) {
      layer.relations.push_back(
          {reg.at(rgcn_shared_weight_name(l)), prepared.merged_edges});
    } else {
      for (std::size_t r = 0; r < kRelationCount; ++r) {
        layer.relations.push_back(
            {reg.at(rgcn_weight_name(l, static_cast<RelationKind>(r))), prepared.edge_ptrs[r]});
      }
    }
    layers.push_back(std::move(layer));
  }
  return layers;
}

MhaIds build_mha_ids(const RegisteredParams& reg, std::size_t heads) {
  MhaIds ids;
  for (std::size_t t = 0; t < heads; ++t) {
    ids.heads.push_back({reg.at(mha_head_name(t, 'q')), reg.at(mha_head_name(t, 'k')),
                         reg.at(mha_head_name(t, 'v'))});
  }
  ids.out = reg.at(kMhaOut);
  return ids;
}

std::vector<AttentionTrace::NodeRef> knowledge_refs(const IntegralGraph& graph) {
  std::vector<AttentionTrace::NodeRef> refs;
  for (std::size_t i = 1; i < graph.size(); ++i) {
    refs.push_back({graph.nodes[i].label, graph.nodes[i].kind});
  }
  return refs;
}

}  // namespace

ForwardResult forward_prepared(Tape& tape, const PreparedClaim& prepared,
                               const RegisteredParams& reg, const ModelConfig& config,
                               const std::vector<Tensor>* dropout_masks,
                               std::optional<int> label) {
  ForwardResult result;
  const std::size_t n = prepared.graph.size();

  ValueId q_enc = tape.constant(prepared.q_enc);
  ValueId f_enc = tape.constant(prepared.f_enc);
  ValueId c_emb = tape.constant(prepared.c_emb);

  ValueId c_graph =
      project_concepts(tape, c_emb, reg.at(kConceptProjWeight), reg.at(kConceptProjBias));
  ValueId n0 = init_embeddings(tape, q_enc, f_enc, c_graph);

  std::vector<RgcnLayerIds> layers = build_rgcn_layers(reg, config, prepared);
  ValueId n_final = rgcn_forward(tape, n0, layers, n, dropout_masks);

  result.q_enc_final = tape.slice_rows(n_final, 0, 1);
  ValueId knowledge = tape.slice_rows(n_final, 1, n);

  ValueId query = config.query_post_rgcn ? result.q_enc_final : q_enc;
  const bool attention = config.pool == PoolKind::Mha || config.pool == PoolKind::Attention;
  MhaIds mha_ids;
  if (attention) {
    mha_ids = build_mha_ids(reg, config.pool == PoolKind::Mha ? config.heads : 1);
  }
  PoolResult pool = pool_variant(tape, config.pool, query, knowledge,
                                 attention ? &mha_ids : nullptr, knowledge_refs(prepared.graph));
  result.trace = std::move(pool.trace);

  MlpIds mlp{reg.at(kMlpW1), reg.at(kMlpB1), reg.at(kMlpW2), reg.at(kMlpB2)};
  result.logits = predict(tape, q_enc, pool.pooled, result.q_enc_final, mlp);

  if (label.has_value()) {
    result.loss = tape.cross_entropy(result.logits, *label);
  }
  return result;
}

ForwardResult forward_claim(Tape& tape, const Pipeline& pipeline, const Claim& claim,
                            const RegisteredParams& reg, std::optional<int> label) {
  PreparedClaim prepared = pipeline.prepare(claim);
  return forward_prepared(tape, prepared, reg, pipeline.config(), nullptr, label);
}

}  // namespace factweave

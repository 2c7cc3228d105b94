#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "factweave/fact_index.hpp"
#include "factweave/fusion.hpp"
#include "factweave/graph.hpp"
#include "factweave/kg.hpp"
#include "factweave/rgcn.hpp"
#include "factweave/rng.hpp"
#include "factweave/tensor.hpp"

namespace factweave {

struct Claim {
  long id = 0;
  std::string text;
  int label = 0;  // 0 = false, 1 = true
};

struct ModelConfig {
  std::size_t d = 32;        // graph hidden width (also text embedder width)
  std::size_t d_c = 24;      // pre-projection concept embedding width
  std::size_t heads = 4;
  std::size_t layers = 3;
  std::size_t k = 5;         // retrieved facts per claim
  double dropout = 0.1;
  std::size_t max_nodes = 200;
  PoolKind pool = PoolKind::Mha;
  bool query_post_rgcn = false;  // harness flag; default uses the initial query

  // Ablation switches.
  bool no_facts = false;
  bool no_kg = false;
  bool no_edge_types = false;  // merge all edges into one relation family
  std::set<RelationKind> drop_relations;

  void validate() const;
};

/// All trainable tensors, keyed by checkpoint name.
struct ModelParams {
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& name) const;
};

/// Fresh parameters: matrices uniform on +-sqrt(6 / (fan_in + fan_out)),
/// biases zero.
ModelParams init_params(const ModelConfig& config, Rng& rng);

/// Parameter leaves registered on a tape, in name order.
struct RegisteredParams {
  std::map<std::string, ValueId> ids;
  ValueId at(const std::string& name) const;
};
RegisteredParams register_params(Tape& tape, const ModelParams& params);

/// Tape gradients mapped back to parameter names.
std::map<std::string, Tensor> named_grads(const Tape& tape, ValueId loss,
                                          const RegisteredParams& reg);

/// Everything retrieval produces for one claim; the trainable part of the
/// forward pass re-runs on top of this without re-touching the stores.
struct PreparedClaim {
  Claim claim;
  std::set<int> seeds;
  Subgraph sub;
  std::vector<ScoredFact> retrieved;
  std::vector<Fact> facts;
  IntegralGraph graph;
  Tensor q_enc;  // 1 x d
  Tensor f_enc;  // k x d
  Tensor c_emb;  // m x d_c
  ConceptCoverage coverage;
  std::array<EdgeListPtr, kRelationCount> edge_ptrs;
  EdgeListPtr merged_edges;
};

struct ForwardResult {
  ValueId logits = -1;  // 1 x 2
  ValueId loss = -1;    // scalar; -1 when no label was supplied
  ValueId q_enc_final = -1;
  AttentionTrace trace;
};

/// Retrieval stores plus embedder seams, wired per the run configuration.
class Pipeline {
 public:
  Pipeline(const KnowledgeGraph& kg, const FactIndex& facts, const ModelConfig& config,
           std::uint64_t embedder_seed);

  /// Attach pre-trained concept vectors; without this call concepts fall
  /// back to hash embeddings of their surface forms.
  void set_concept_table(ConceptTable table);

  const ModelConfig& config() const { return config_; }
  const KnowledgeGraph& kg() const { return kg_; }
  const FactIndex& facts() const { return facts_; }
  const Embedder& text_embedder() const { return *text_embedder_; }
  const Embedder& retrieval_embedder() const { return *retrieval_embedder_; }

  /// The dual-encoder stand-in for retrieval. An index built with this
  /// embedder (same dim, same embedder_seed) scores queries consistently;
  /// queries against a precomputed index assume its encoder hashed the same
  /// way.
  static HashEmbedder make_retrieval_embedder(std::size_t dim, std::uint64_t embedder_seed) {
    return HashEmbedder(dim, Rng::derive(embedder_seed, 2));
  }

  PreparedClaim prepare(const Claim& claim) const;

 private:
  const KnowledgeGraph& kg_;
  const FactIndex& facts_;
  ModelConfig config_;
  std::unique_ptr<HashEmbedder> text_embedder_;       // width d
  std::unique_ptr<HashEmbedder> retrieval_embedder_;  // width of the fact index
  std::unique_ptr<HashEmbedder> concept_embedder_;    // width d_c
  std::optional<ConceptTable> concept_table_;
};

/// Dropout masks for one claim graph, one per layer; entries are 0 or
/// 1/(1-p) (inverted dropout).
std::vector<Tensor> make_dropout_masks(const PreparedClaim& prepared, const ModelConfig& config,
                                       Rng& rng);

/// The trainable forward pass: concept projection, R-GCN, pooling,
/// prediction, optional cross-entropy loss. Train mode applies the supplied
/// dropout masks; eval mode passes masks = nullptr.
ForwardResult forward_prepared(Tape& tape, const PreparedClaim& prepared,
                               const RegisteredParams& reg, const ModelConfig& config,
                               const std::vector<Tensor>* dropout_masks,
                               std::optional<int> label);

/// One-shot convenience: prepare + forward in eval mode.
ForwardResult forward_claim(Tape& tape, const Pipeline& pipeline, const Claim& claim,
                            const RegisteredParams& reg, std::optional<int> label);

// Non-R-GCN checkpoint names.
inline constexpr const char* kConceptProjWeight = "concept_proj.weight";
inline constexpr const char* kConceptProjBias = "concept_proj.bias";
inline constexpr const char* kMlpW1 = "mlp.w1";
inline constexpr const char* kMlpB1 = "mlp.b1";
inline constexpr const char* kMlpW2 = "mlp.w2";
inline constexpr const char* kMlpB2 = "mlp.b2";
std::string mha_head_name(std::size_t head, char which);  // 'q' | 'k' | 'v'
inline constexpr const char* kMhaOut = "mha.out";

}  // namespace factweave

#pragma once

#include <string>
#include <vector>

#include "factweave/graph.hpp"
#include "factweave/tensor.hpp"

namespace factweave {

/// Per-head projections for multi-head attention pooling.
struct MhaIds {
  struct Head {
    ValueId query;  // d x d_q
    ValueId key;    // d x d_k (d_q == d_k)
    ValueId value;  // d x d_v
  };
  std::vector<Head> heads;
  ValueId out;  // (h * d_v) x d
};

/// Attention weights captured per head over the knowledge nodes, with the
/// node labels they point at.
struct AttentionTrace {
  struct NodeRef {
    std::string label;
    NodeKind kind = NodeKind::Fact;
  };
  std::vector<NodeRef> nodes;
  std::vector<std::vector<double>> head_weights;  // [head][node]
};

struct PoolResult {
  ValueId pooled;  // 1 x d
  AttentionTrace trace;
};

/// K_a = MHA(query, knowledge): per head softmax(q W^Q (H W^K)^T / sqrt(d_k))
/// (H W^V), heads concatenated through W^O. A graph with no knowledge nodes
/// pools to the zero vector with an empty trace.
PoolResult mha_pool(Tape& tape, ValueId query, ValueId knowledge, const MhaIds& params,
                    const std::vector<AttentionTrace::NodeRef>& node_refs);

enum class PoolKind { Max, Mean, Attention, Mha };

const char* pool_kind_name(PoolKind k);
PoolKind parse_pool_kind(const std::string& name);

/// Pooling harness: max / mean ignore the question, attention is single-head
/// MHA, mha is the full mechanism.
PoolResult pool_variant(Tape& tape, PoolKind kind, ValueId query, ValueId knowledge,
                        const MhaIds* params,
                        const std::vector<AttentionTrace::NodeRef>& node_refs);

struct MlpIds {
  ValueId w1;  // 3d x d
  ValueId b1;  // 1 x d
  ValueId w2;  // d x nlabel
  ValueId b2;  // 1 x nlabel
};

/// logits = W2 tanh([q_enc; K_a; q_enc_L] W1 + b1) + b2.
ValueId predict(Tape& tape, ValueId q_enc, ValueId pooled, ValueId q_enc_final,
                const MlpIds& params);

}  // namespace factweave

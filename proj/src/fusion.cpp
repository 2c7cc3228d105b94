#include "factweave/fusion.hpp"

#include <cmath>

#include "factweave/error.hpp"

namespace factweave {

PoolResult mha_pool(Tape& tape, ValueId query, ValueId knowledge, const MhaIds& params,
                    const std::vector<AttentionTrace::NodeRef>& node_refs) {
  const Tensor& q = tape.value(query);
  const Tensor& hk = tape.value(knowledge);
  if (q.rank() != 2 || q.rows() != 1) {
    throw DimensionError("mha_pool query must be 1 x d, got " + q.shape_str());
  }

  PoolResult result;
  result.trace.nodes = node_refs;

  if (hk.rows() == 0) {
    // Degenerate graph: nothing to pool over.
    result.pooled = tape.constant(Tensor::zeros({1, q.cols()}));
    return result;
  }
  if (hk.cols() != q.cols()) {
    throw DimensionError("mha_pool width mismatch: query " + q.shape_str() + " vs knowledge " +
                         hk.shape_str());
  }
  if (params.heads.empty()) throw ContractError("mha_pool needs at least one head");

  std::vector<ValueId> head_outputs;
  for (const MhaIds::Head& head : params.heads) {
    const std::size_t d_k = tape.value(head.key).cols();
    ValueId q_proj = tape.matmul(query, head.query);        // 1 x d_q
    ValueId k_proj = tape.matmul(knowledge, head.key);      // n x d_k
    ValueId v_proj = tape.matmul(knowledge, head.value);    // n x d_v
    ValueId scores = tape.scale(tape.matmul(q_proj, tape.transpose(k_proj)),
                                1.0 / std::sqrt(static_cast<double>(d_k)));
    ValueId weights = tape.softmax_rows(scores);            // 1 x n
    result.trace.head_weights.push_back(tape.value(weights).data());
    head_outputs.push_back(tape.attn_mix(weights, v_proj));  // 1 x d_v
  }
  ValueId concat = head_outputs.size() == 1 ? head_outputs.front() : tape.concat_cols(head_outputs);
  result.pooled = tape.matmul(concat, params.out);
  return result;
}

const char* pool_kind_name(PoolKind k) {
  switch (k) {
    case PoolKind::Max:
      return "max";
    case PoolKind::Mean:
      return "mean";
    case PoolKind::Attention:
      return "attention";
    case PoolKind::Mha:
      return "mha";
  }
  return "?";
}

PoolKind parse_pool_kind(const std::string& name) {
  if (name == "max") return PoolKind::Max;
  if (name == "mean") return PoolKind::Mean;
  if (name == "attention") return PoolKind::Attention;
  if (name == "mha") return PoolKind::Mha;
  throw ContractError("unknown pool kind '" + name + "' (max|mean|attention|mha)");
}

PoolResult pool_variant(Tape& tape, PoolKind kind, ValueId query, ValueId knowledge,
                        const MhaIds* params,
                        const std::vector<AttentionTrace::NodeRef>& node_refs) {
  if (kind == PoolKind::Attention || kind == PoolKind::Mha) {
    if (params == nullptr) throw ContractError("attention pooling needs MHA parameters");
    return mha_pool(tape, query, knowledge, *params, node_refs);
  }
  const Tensor& hk = tape.value(knowledge);
  PoolResult result;
  result.trace.nodes = node_refs;
  if (hk.rows() == 0) {
    result.pooled = tape.constant(Tensor::zeros({1, tape.value(query).cols()}));
    return result;
  }
  result.pooled = (kind == PoolKind::Max) ? tape.max_rows(knowledge) : tape.mean_rows(knowledge);
  return result;
}

ValueId predict(Tape& tape, ValueId q_enc, ValueId pooled, ValueId q_enc_final,
                const MlpIds& params) {
  const std::size_t d = tape.value(q_enc).cols();
  if (tape.value(pooled).cols() != d || tape.value(q_enc_final).cols() != d) {
    throw DimensionError("predict inputs must share width " + std::to_string(d) + ": got " +
                         tape.value(pooled).shape_str() + " and " +
                         tape.value(q_enc_final).shape_str());
  }
  ValueId features = tape.concat_cols({q_enc, pooled, q_enc_final});  // 1 x 3d
  ValueId hidden = tape.tanh(tape.add_rowvec(tape.matmul(features, params.w1), params.b1));
  return tape.add_rowvec(tape.matmul(hidden, params.w2), params.b2);
}

}  // namespace factweave

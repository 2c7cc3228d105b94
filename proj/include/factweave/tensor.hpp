#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "factweave/error.hpp"

namespace factweave {

// Dense row-major tensor of doubles. Immutable after construction, so
// instances are safe to share read-only across threads. Construction
// rejects NaN/Inf outright.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}  // rank-0 zero scalar
  Tensor(std::vector<std::size_t> shape, std::vector<double> data, bool requires_grad = false);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double v);
  static Tensor row(std::vector<double> values);  // 1 x n
  static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> data,
                       bool requires_grad = false);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  bool requires_grad() const { return requires_grad_; }

  // Rank-2 accessors.
  std::size_t rows() const;
  std::size_t cols() const;
  double at(std::size_t r, std::size_t c) const;

  double item() const;  // numel() == 1
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_str() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
  bool requires_grad_ = false;
};

// Exact Gaussian-CDF GELU: x * Phi(x). Not the tanh approximation.
double gelu_scalar(double x);
double gelu_grad_scalar(double x);

// Sums values in ascending order so the result does not depend on the
// original operand order. Used by the reductions that must be invariant
// under node/row permutations (softmax denominators, neighbor aggregation,
// attention mixing). Sorts the buffer in place.
double stable_sum(std::vector<double>& buf);

using ValueId = int;

// (source, target) directed edges consumed by Tape::aggregate.
using EdgeList = std::vector<std::pair<std::size_t, std::size_t>>;
using EdgeListPtr = std::shared_ptr<const EdgeList>;

enum class OpKind {
  Leaf,
  MatMul,
  Add,
  AddRowVec,
  Scale,
  Mul,
  Gelu,
  Tanh,
  SoftmaxRows,
  Transpose,
  ConcatRows,
  ConcatCols,
  SliceRows,
  Sum,
  MeanRows,
  MaxRows,
  Aggregate,
  AttnMix,
  CrossEntropy,
};

// Ordered record of primitive ops. Nodes appear after their operands by
// construction, so a single reverse pass computes exact gradients. Forward
// values are computed eagerly; replay_matches() re-runs every kernel and
// confirms bit-identical results.
class Tape {
 public:
  ValueId leaf(Tensor value);
  ValueId constant(Tensor value);  // requires_grad forced off

  ValueId matmul(ValueId a, ValueId b);
  ValueId add(ValueId a, ValueId b);
  // (r x c) + (1 x c), bias broadcast over rows.
  ValueId add_rowvec(ValueId m, ValueId v);
  ValueId scale(ValueId a, double factor);
  ValueId mul(ValueId a, ValueId b);  // elementwise; dropout masks go through here
  ValueId gelu(ValueId a);
  ValueId tanh(ValueId a);
  ValueId softmax_rows(ValueId a);
  ValueId transpose(ValueId a);
  ValueId concat_rows(const std::vector<ValueId>& parts);
  ValueId concat_cols(const std::vector<ValueId>& parts);
  ValueId slice_rows(ValueId a, std::size_t begin, std::size_t end);
  ValueId sum(ValueId a);
  ValueId mean_rows(ValueId a);  // 1 x c column means
  ValueId max_rows(ValueId a);   // 1 x c column maxima (first argmax wins)
  // Per-relation neighbor sum: out[t] += h[s] / indegree(t) over (s, t) edges.
  ValueId aggregate(ValueId h, EdgeListPtr edges, std::size_t node_count);
  // weights (r x n) times values (n x c) with order-independent inner sums.
  ValueId attn_mix(ValueId weights, ValueId values);
  // -log softmax(logits)[label] for a 1 x n logit row; numerically stable.
  ValueId cross_entropy(ValueId logits, int label);

  const Tensor& value(ValueId id) const;
  std::size_t size() const { return nodes_.size(); }

  // Exact reverse-mode gradients of a scalar node w.r.t. every
  // requires_grad leaf reachable from it. Unreached leaves get zeros.
  std::map<ValueId, Tensor> backward(ValueId loss_id) const;

  bool replay_matches() const;

 private:
  struct Node {
    OpKind op = OpKind::Leaf;
    std::vector<ValueId> args;
    Tensor value;
    bool needs_grad = false;
    // Op payload; unused fields stay defaulted.
    double factor = 0.0;
    std::size_t begin = 0, end = 0;
    int label = 0;
    std::size_t node_count = 0;
    EdgeListPtr edges;
  };

  ValueId push(Node node);
  Tensor compute(const Node& node) const;
  const Tensor& arg(const Node& node, std::size_t i) const;
  void check_id(ValueId id) const;

  // Deque keeps value() references stable while later ops are recorded.
  std::deque<Node> nodes_;
};

}  // namespace factweave

#include "factweave/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace factweave {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void check_finite(const std::vector<double>& data) {
  for (double v : data) {
    if (!std::isfinite(v)) throw NumericalError("tensor contains a non-finite value");
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data, bool requires_grad)
    : shape_(std::move(shape)), data_(std::move(data)), requires_grad_(requires_grad) {
  if (shape_product(shape_) != data_.size()) {
    throw DimensionError("tensor shape " + shape_str() + " does not match data length " +
                         std::to_string(data_.size()));
  }
  check_finite(data_);
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::row(std::vector<double> values) {
  std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t r, std::size_t c, std::vector<double> data, bool requires_grad) {
  return Tensor({r, c}, std::move(data), requires_grad);
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows() on tensor of shape " + shape_str());
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols() on tensor of shape " + shape_str());
  return shape_[1];
}

double Tensor::at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str());
  return data_[0];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << "x";
    os << shape_[i];
  }
  os << ")";
  return os.str();
}

double gelu_scalar(double x) {
  // Phi(x) = 0.5 * erfc(-x / sqrt(2))
  return x * 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double gelu_grad_scalar(double x) {
  const double phi_cdf = 0.5 * std::erfc(-x / std::sqrt(2.0));
  const double phi_pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return phi_cdf + x * phi_pdf;
}

double stable_sum(std::vector<double>& buf) {
  std::sort(buf.begin(), buf.end());
  double s = 0.0;
  for (double v : buf) s += v;
  return s;
}

// --------------------------------------------------------------------------
// Tape

ValueId Tape::push(Node node) {
  if (node.op == OpKind::Leaf) {
    node.needs_grad = node.value.requires_grad();
  } else {
    node.needs_grad = false;
    for (ValueId a : node.args) node.needs_grad = node.needs_grad || nodes_[a].needs_grad;
    node.value = compute(node);
  }
  nodes_.push_back(std::move(node));
  return static_cast<ValueId>(nodes_.size() - 1);
}

void Tape::check_id(ValueId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw ContractError("tape value id out of range: " + std::to_string(id));
  }
}

const Tensor& Tape::value(ValueId id) const {
  check_id(id);
  return nodes_[id].value;
}

const Tensor& Tape::arg(const Node& node, std::size_t i) const { return nodes_[node.args[i]].value; }

ValueId Tape::leaf(Tensor value) {
  Node n;
  n.op = OpKind::Leaf;
  n.value = std::move(value);
  return push(std::move(n));
}

ValueId Tape::constant(Tensor value) {
  Tensor v(value.shape(), value.data(), /*requires_grad=*/false);
  return leaf(std::move(v));
}

ValueId Tape::matmul(ValueId a, ValueId b) {
  check_id(a);
  check_id(b);
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows()) {
    throw DimensionError("matmul shape mismatch: " + ta.shape_str() + " x " + tb.shape_str());
  }
  Node n;
  n.op = OpKind::MatMul;
  n.args = {a, b};
  return push(std::move(n));
}

ValueId Tape::add(ValueId a, ValueId b) {
  check_id(a);
  check_id(b);
  if (!nodes_[a].value.same_shape(nodes_[b].value)) {
    throw DimensionError("add shape mismatch: " + nodes_[a].value.shape_str() + " vs " +
                         nodes_[b].value.shape_str());
  }
  Node n;
  n.op = OpKind::Add;
  n.args = {a, b};
  return push(std::move(n));
}

ValueId Tape::add_rowvec(ValueId m, ValueId v) {
  check_id(m);
  check_id(v);
  const Tensor& tm = nodes_[m].value;
  const Tensor& tv = nodes_[v].value;
  if (tm.rank() != 2 || tv.rank() != 2 || tv.rows() != 1 || tv.cols() != tm.cols()) {
    throw DimensionError("add_rowvec shape mismatch: " + tm.shape_str() + " + " + tv.shape_str());
  }
  Node n;
  n.op = OpKind::AddRowVec;
  n.args = {m, v};
  return push(std::move(n));
}

ValueId Tape::scale(ValueId a, double factor) {
  check_id(a);
  Node n;
  n.op = OpKind::Scale;
  n.args = {a};
  n.factor = factor;
  return push(std::move(n));
}

ValueId Tape::mul(ValueId a, ValueId b) {
  check_id(a);
  check_id(b);
  if (!nodes_[a].value.same_shape(nodes_[b].value)) {
    throw DimensionError("mul shape mismatch: " + nodes_[a].value.shape_str() + " vs " +
                         nodes_[b].value.shape_str());
  }
  Node n;
  n.op = OpKind::Mul;
  n.args = {a, b};
  return push(std::move(n));
}

ValueId Tape::gelu(ValueId a) {
  check_id(a);
  Node n;
  n.op = OpKind::Gelu;
  n.args = {a};
  return push(std::move(n));
}

ValueId Tape::tanh(ValueId a) {
  check_id(a);
  Node n;
  n.op = OpKind::Tanh;
  n.args = {a};
  return push(std::move(n));
}

ValueId Tape::softmax_rows(ValueId a) {
  check_id(a);
  if (nodes_[a].value.rank() != 2) {
    throw DimensionError("softmax_rows expects rank-2, got " + nodes_[a].value.shape_str());
  }
  Node n;
  n.op = OpKind::SoftmaxRows;
  n.args = {a};
  return push(std::move(n));
}

ValueId Tape::transpose(ValueId a) {
  check_id(a);
  if (nodes_[a].value.rank() != 2) {
    throw DimensionError("transpose expects rank-2, got " + nodes_[a].value.shape_str());
  }
  Node n;
  n.op = OpKind::Transpose;
  n.args = {a};
  return push(std::move(n));
}

ValueId Tape::concat_rows(const std::vector<ValueId>& parts) {
  if (parts.empty()) throw ContractError("concat_rows with no parts");
  std::size_t cols = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    check_id(parts[i]);
    const Tensor& t = nodes_[parts[i]].value;
    if (t.rank() != 2) throw DimensionError("concat_rows expects rank-2, got " + t.shape_str());
    if (i == 0) {
      cols = t.cols();
    } else if (t.cols() != cols) {
      throw DimensionError("concat_rows column mismatch: " + std::to_string(cols) + " vs " +
                           std::to_string(t.cols()));
    }
  }
  Node n;
  n.op = OpKind::ConcatRows;
  n.args = parts;
  return push(std::move(n));
}

ValueId Tape::concat_cols(const std::vector<ValueId>& parts) {
  if (parts.empty()) throw ContractError("concat_cols with no parts");
  std::size_t rows = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    check_id(parts[i]);
    const Tensor& t = nodes_[parts[i]].value;
    if (t.rank() != 2) throw DimensionError("concat_cols expects rank-2, got " + t.shape_str());
    if (i == 0) {
      rows = t.rows();
    } else if (t.rows() != rows) {
      throw DimensionError("concat_cols row mismatch: " + std::to_string(rows) + " vs " +
                           std::to_string(t.rows()));
    }
  }
  Node n;
  n.op = OpKind::ConcatCols;
  n.args = parts;
  return push(std::move(n));
}

ValueId Tape::slice_rows(ValueId a, std::size_t begin, std::size_t end) {
  check_id(a);
  const Tensor& t = nodes_[a].value;
  if (t.rank() != 2) throw DimensionError("slice_rows expects rank-2, got " + t.shape_str());
  if (begin > end || end > t.rows()) {
    throw ContractError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(end) +
                        ") out of range for " + t.shape_str());
  }
  Node n;
  n.op = OpKind::SliceRows;
  n.args = {a};
  n.begin = begin;
  n.end = end;
  return push(std::move(n));
}

ValueId Tape::sum(ValueId a) {
  check_id(a);
  Node n;
  n.op = OpKind::Sum;
  n.args = {a};
  return push(std::move(n));
}

ValueId Tape::mean_rows(ValueId a) {
  check_id(a);
  const Tensor& t = nodes_[a].value;
  if (t.rank() != 2) throw DimensionError("mean_rows expects rank-2, got " + t.shape_str());
  if (t.rows() == 0) throw ContractError("mean_rows on a zero-row matrix");
  Node n;
  n.op = OpKind::MeanRows;
  n.args = {a};
  return push(std::move(n));
}

ValueId Tape::max_rows(ValueId a) {
  check_id(a);
  const Tensor& t = nodes_[a].value;
  if (t.rank() != 2) throw DimensionError("max_rows expects rank-2, got " + t.shape_str());
  if (t.rows() == 0) throw ContractError("max_rows on a zero-row matrix");
  Node n;
  n.op = OpKind::MaxRows;
  n.args = {a};
  return push(std::move(n));
}

ValueId Tape::aggregate(ValueId h, EdgeListPtr edges, std::size_t node_count) {
  check_id(h);
  const Tensor& t = nodes_[h].value;
  if (t.rank() != 2 || t.rows() != node_count) {
    throw DimensionError("aggregate expects " + std::to_string(node_count) + " rows, got " +
                         t.shape_str());
  }
  if (!edges) throw ContractError("aggregate with null edge list");
  for (const auto& [s, d] : *edges) {
    if (s >= node_count || d >= node_count) {
      throw ContractError("aggregate edge endpoint out of range");
    }
  }
  Node n;
  n.op = OpKind::Aggregate;
  n.args = {h};
  n.edges = std::move(edges);
  n.node_count = node_count;
  return push(std::move(n));
}

ValueId Tape::attn_mix(ValueId weights, ValueId values) {
  check_id(weights);
  check_id(values);
  const Tensor& tw = nodes_[weights].value;
  const Tensor& tv = nodes_[values].value;
  if (tw.rank() != 2 || tv.rank() != 2 || tw.cols() != tv.rows()) {
    throw DimensionError("attn_mix shape mismatch: " + tw.shape_str() + " x " + tv.shape_str());
  }
  Node n;
  n.op = OpKind::AttnMix;
  n.args = {weights, values};
  return push(std::move(n));
}

ValueId Tape::cross_entropy(ValueId logits, int label) {
  check_id(logits);
  const Tensor& t = nodes_[logits].value;
  if (t.rank() != 2 || t.rows() != 1 || t.cols() == 0) {
    throw DimensionError("cross_entropy expects a 1 x n logit row, got " + t.shape_str());
  }
  if (label < 0 || static_cast<std::size_t>(label) >= t.cols()) {
    throw ContractError("cross_entropy label " + std::to_string(label) + " outside [0, " +
                        std::to_string(t.cols()) + ")");
  }
  Node n;
  n.op = OpKind::CrossEntropy;
  n.args = {logits};
  n.label = label;
  return push(std::move(n));
}

Tensor Tape::compute(const Node& node) const {
  switch (node.op) {
    case OpKind::Leaf:
      return node.value;
    case OpKind::MatMul: {
      const Tensor& a = arg(node, 0);
      const Tensor& b = arg(node, 1);
      const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
      std::vector<double> out(m * n, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::size_t t = 0; t < k; ++t) s += a.data()[i * k + t] * b.data()[t * n + j];
          out[i * n + j] = s;
        }
      }
      return Tensor({m, n}, std::move(out));
    }
    case OpKind::Add: {
      const Tensor& a = arg(node, 0);
      const Tensor& b = arg(node, 1);
      std::vector<double> out(a.numel());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
      return Tensor(a.shape(), std::move(out));
    }
    case OpKind::AddRowVec: {
      const Tensor& m = arg(node, 0);
      const Tensor& v = arg(node, 1);
      const std::size_t r = m.rows(), c = m.cols();
      std::vector<double> out(r * c);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = m.data()[i * c + j] + v.data()[j];
      return Tensor({r, c}, std::move(out));
    }
    case OpKind::Scale: {
      const Tensor& a = arg(node, 0);
      std::vector<double> out(a.numel());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * node.factor;
      return Tensor(a.shape(), std::move(out));
    }
    case OpKind::Mul: {
      const Tensor& a = arg(node, 0);
      const Tensor& b = arg(node, 1);
      std::vector<double> out(a.numel());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
      return Tensor(a.shape(), std::move(out));
    }
    case OpKind::Gelu: {
      const Tensor& a = arg(node, 0);
      std::vector<double> out(a.numel());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = gelu_scalar(a.data()[i]);
      return Tensor(a.shape(), std::move(out));
    }
    case OpKind::Tanh: {
      const Tensor& a = arg(node, 0);
      std::vector<double> out(a.numel());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.data()[i]);
      return Tensor(a.shape(), std::move(out));
    }
    case OpKind::SoftmaxRows: {
      const Tensor& a = arg(node, 0);
      const std::size_t r = a.rows(), c = a.cols();
      std::vector<double> out(r * c);
      std::vector<double> buf;
      for (std::size_t i = 0; i < r; ++i) {
        double mx = -HUGE_VAL;
        for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, a.data()[i * c + j]);
        buf.clear();
        for (std::size_t j = 0; j < c; ++j) {
          double e = std::exp(a.data()[i * c + j] - mx);
          out[i * c + j] = e;
          buf.push_back(e);
        }
        double denom = stable_sum(buf);
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= denom;
      }
      return Tensor({r, c}, std::move(out));
    }
    case OpKind::Transpose: {
      const Tensor& a = arg(node, 0);
      const std::size_t r = a.rows(), c = a.cols();
      std::vector<double> out(r * c);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.data()[i * c + j];
      return Tensor({c, r}, std::move(out));
    }
    case OpKind::ConcatRows: {
      const std::size_t c = arg(node, 0).cols();
      std::size_t total_rows = 0;
      for (std::size_t p = 0; p < node.args.size(); ++p) total_rows += arg(node, p).rows();
      std::vector<double> out;
      out.reserve(total_rows * c);
      for (std::size_t p = 0; p < node.args.size(); ++p) {
        const Tensor& t = arg(node, p);
        out.insert(out.end(), t.data().begin(), t.data().end());
      }
      return Tensor({total_rows, c}, std::move(out));
    }
    case OpKind::ConcatCols: {
      const std::size_t r = arg(node, 0).rows();
      std::size_t total_cols = 0;
      for (std::size_t p = 0; p < node.args.size(); ++p) total_cols += arg(node, p).cols();
      std::vector<double> out(r * total_cols);
      std::size_t col_off = 0;
      for (std::size_t p = 0; p < node.args.size(); ++p) {
        const Tensor& t = arg(node, p);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < t.cols(); ++j)
            out[i * total_cols + col_off + j] = t.data()[i * t.cols() + j];
        col_off += t.cols();
      }
      return Tensor({r, total_cols}, std::move(out));
    }
    case OpKind::SliceRows: {
      const Tensor& a = arg(node, 0);
      const std::size_t c = a.cols();
      std::vector<double> out(a.data().begin() + node.begin * c, a.data().begin() + node.end * c);
      return Tensor({node.end - node.begin, c}, std::move(out));
    }
    case OpKind::Sum: {
      const Tensor& a = arg(node, 0);
      std::vector<double> buf(a.data());
      return Tensor::scalar(stable_sum(buf));
    }
    case OpKind::MeanRows: {
      const Tensor& a = arg(node, 0);
      const std::size_t r = a.rows(), c = a.cols();
      std::vector<double> out(c);
      std::vector<double> buf;
      for (std::size_t j = 0; j < c; ++j) {
        buf.clear();
        for (std::size_t i = 0; i < r; ++i) buf.push_back(a.data()[i * c + j]);
        out[j] = stable_sum(buf) / static_cast<double>(r);
      }
      return Tensor({1, c}, std::move(out));
    }
    case OpKind::MaxRows: {
      const Tensor& a = arg(node, 0);
      const std::size_t r = a.rows(), c = a.cols();
      std::vector<double> out(c);
      for (std::size_t j = 0; j < c; ++j) {
        double mx = a.data()[j];
        for (std::size_t i = 1; i < r; ++i) mx = std::max(mx, a.data()[i * c + j]);
        out[j] = mx;
      }
      return Tensor({1, c}, std::move(out));
    }
    case OpKind::Aggregate: {
      const Tensor& h = arg(node, 0);
      const std::size_t n = node.node_count, c = h.cols();
      std::vector<std::vector<std::size_t>> sources(n);
      for (const auto& [s, t] : *node.edges) sources[t].push_back(s);
      std::vector<double> out(n * c, 0.0);
      std::vector<double> buf;
      for (std::size_t t = 0; t < n; ++t) {
        if (sources[t].empty()) continue;
        const double inv = 1.0 / static_cast<double>(sources[t].size());
        for (std::size_t j = 0; j < c; ++j) {
          buf.clear();
          for (std::size_t s : sources[t]) buf.push_back(h.data()[s * c + j]);
          out[t * c + j] = stable_sum(buf) * inv;
        }
      }
      return Tensor({n, c}, std::move(out));
    }
    case OpKind::AttnMix: {
      const Tensor& w = arg(node, 0);
      const Tensor& v = arg(node, 1);
      const std::size_t m = w.rows(), k = w.cols(), n = v.cols();
      std::vector<double> out(m * n, 0.0);
      std::vector<double> buf;
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          buf.clear();
          for (std::size_t t = 0; t < k; ++t) buf.push_back(w.data()[i * k + t] * v.data()[t * n + j]);
          out[i * n + j] = stable_sum(buf);
        }
      }
      return Tensor({m, n}, std::move(out));
    }
    case OpKind::CrossEntropy: {
      const Tensor& l = arg(node, 0);
      const std::size_t c = l.cols();
      double mx = -HUGE_VAL;
      for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, l.data()[j]);
      double acc = 0.0;
      for (std::size_t j = 0; j < c; ++j) acc += std::exp(l.data()[j] - mx);
      const double lse = mx + std::log(acc);
      return Tensor::scalar(lse - l.data()[static_cast<std::size_t>(node.label)]);
    }
  }
  throw ContractError("unreachable op kind");
}

std::map<ValueId, Tensor> Tape::backward(ValueId loss_id) const {
  check_id(loss_id);
  const Tensor& loss = nodes_[loss_id].value;
  if (loss.rank() != 0 || loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + loss.shape_str());
  }

  std::vector<std::vector<double>> grads(nodes_.size());
  std::vector<char> has_grad(nodes_.size(), 0);
  auto touch = [&](ValueId id) -> std::vector<double>& {
    if (!has_grad[id]) {
      grads[id].assign(nodes_[id].value.numel(), 0.0);
      has_grad[id] = 1;
    }
    return grads[id];
  };
  touch(loss_id)[0] = 1.0;

  for (ValueId i = loss_id; i >= 0; --i) {
    const Node& node = nodes_[i];
    if (!has_grad[i] || !node.needs_grad || node.op == OpKind::Leaf) continue;
    const std::vector<double>& g = grads[i];

    switch (node.op) {
      case OpKind::MatMul: {
        const Tensor& a = arg(node, 0);
        const Tensor& b = arg(node, 1);
        const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
        if (nodes_[node.args[0]].needs_grad) {
          auto& ga = touch(node.args[0]);  // g (m x n) * b^T (n x k)
          for (std::size_t i2 = 0; i2 < m; ++i2)
            for (std::size_t t = 0; t < k; ++t) {
              double s = 0.0;
              for (std::size_t j = 0; j < n; ++j) s += g[i2 * n + j] * b.data()[t * n + j];
              ga[i2 * k + t] += s;
            }
        }
        if (nodes_[node.args[1]].needs_grad) {
          auto& gb = touch(node.args[1]);  // a^T (k x m) * g (m x n)
          for (std::size_t t = 0; t < k; ++t)
            for (std::size_t j = 0; j < n; ++j) {
              double s = 0.0;
              for (std::size_t i2 = 0; i2 < m; ++i2) s += a.data()[i2 * k + t] * g[i2 * n + j];
              gb[t * n + j] += s;
            }
        }
        break;
      }
      case OpKind::Add: {
        for (int side = 0; side < 2; ++side) {
          if (!nodes_[node.args[side]].needs_grad) continue;
          auto& gx = touch(node.args[side]);
          for (std::size_t t = 0; t < g.size(); ++t) gx[t] += g[t];
        }
        break;
      }
      case OpKind::AddRowVec: {
        const Tensor& m = arg(node, 0);
        const std::size_t r = m.rows(), c = m.cols();
        if (nodes_[node.args[0]].needs_grad) {
          auto& gm = touch(node.args[0]);
          for (std::size_t t = 0; t < g.size(); ++t) gm[t] += g[t];
        }
        if (nodes_[node.args[1]].needs_grad) {
          auto& gv = touch(node.args[1]);
          for (std::size_t i2 = 0; i2 < r; ++i2)
            for (std::size_t j = 0; j < c; ++j) gv[j] += g[i2 * c + j];
        }
        break;
      }
      case OpKind::Scale: {
        if (nodes_[node.args[0]].needs_grad) {
          auto& gx = touch(node.args[0]);
          for (std::size_t t = 0; t < g.size(); ++t) gx[t] += g[t] * node.factor;
        }
        break;
      }
      case OpKind::Mul: {
        const Tensor& a = arg(node, 0);
        const Tensor& b = arg(node, 1);
        if (nodes_[node.args[0]].needs_grad) {
          auto& ga = touch(node.args[0]);
          for (std::size_t t = 0; t < g.size(); ++t) ga[t] += g[t] * b.data()[t];
        }
        if (nodes_[node.args[1]].needs_grad) {
          auto& gb = touch(node.args[1]);
          for (std::size_t t = 0; t < g.size(); ++t) gb[t] += g[t] * a.data()[t];
        }
        break;
      }
      case OpKind::Gelu: {
        const Tensor& a = arg(node, 0);
        auto& gx = touch(node.args[0]);
        for (std::size_t t = 0; t < g.size(); ++t) gx[t] += g[t] * gelu_grad_scalar(a.data()[t]);
        break;
      }
      case OpKind::Tanh: {
        const Tensor& y = node.value;
        auto& gx = touch(node.args[0]);
        for (std::size_t t = 0; t < g.size(); ++t)
          gx[t] += g[t] * (1.0 - y.data()[t] * y.data()[t]);
        break;
      }
      case OpKind::SoftmaxRows: {
        const Tensor& y = node.value;
        const std::size_t r = y.rows(), c = y.cols();
        auto& gx = touch(node.args[0]);
        for (std::size_t i2 = 0; i2 < r; ++i2) {
          double dot = 0.0;
          for (std::size_t j = 0; j < c; ++j) dot += g[i2 * c + j] * y.data()[i2 * c + j];
          for (std::size_t j = 0; j < c; ++j)
            gx[i2 * c + j] += y.data()[i2 * c + j] * (g[i2 * c + j] - dot);
        }
        break;
      }
      case OpKind::Transpose: {
        const std::size_t r = node.value.rows(), c = node.value.cols();  // transposed dims
        auto& gx = touch(node.args[0]);
        for (std::size_t i2 = 0; i2 < r; ++i2)
          for (std::size_t j = 0; j < c; ++j) gx[i2 + j * r] += g[i2 * c + j];
        break;
      }
      case OpKind::ConcatRows: {
        std::size_t row_off = 0;
        const std::size_t c = node.value.cols();
        for (std::size_t p = 0; p < node.args.size(); ++p) {
          const std::size_t pr = arg(node, p).rows();
          if (nodes_[node.args[p]].needs_grad) {
            auto& gp = touch(node.args[p]);
            for (std::size_t t = 0; t < pr * c; ++t) gp[t] += g[row_off * c + t];
          }
          row_off += pr;
        }
        break;
      }
      case OpKind::ConcatCols: {
        std::size_t col_off = 0;
        const std::size_t r = node.value.rows(), c = node.value.cols();
        for (std::size_t p = 0; p < node.args.size(); ++p) {
          const std::size_t pc = arg(node, p).cols();
          if (nodes_[node.args[p]].needs_grad) {
            auto& gp = touch(node.args[p]);
            for (std::size_t i2 = 0; i2 < r; ++i2)
              for (std::size_t j = 0; j < pc; ++j) gp[i2 * pc + j] += g[i2 * c + col_off + j];
          }
          col_off += pc;
        }
        break;
      }
      case OpKind::SliceRows: {
        const std::size_t c = node.value.cols();
        auto& gx = touch(node.args[0]);
        for (std::size_t t = 0; t < g.size(); ++t) gx[node.begin * c + t] += g[t];
        break;
      }
      case OpKind::Sum: {
        auto& gx = touch(node.args[0]);
        for (std::size_t t = 0; t < gx.size(); ++t) gx[t] += g[0];
        break;
      }
      case OpKind::MeanRows: {
        const Tensor& a = arg(node, 0);
        const std::size_t r = a.rows(), c = a.cols();
        auto& gx = touch(node.args[0]);
        const double inv = 1.0 / static_cast<double>(r);
        for (std::size_t i2 = 0; i2 < r; ++i2)
          for (std::size_t j = 0; j < c; ++j) gx[i2 * c + j] += g[j] * inv;
        break;
      }
      case OpKind::MaxRows: {
        const Tensor& a = arg(node, 0);
        const std::size_t r = a.rows(), c = a.cols();
        auto& gx = touch(node.args[0]);
        for (std::size_t j = 0; j < c; ++j) {
          std::size_t best = 0;
          for (std::size_t i2 = 1; i2 < r; ++i2)
            if (a.data()[i2 * c + j] > a.data()[best * c + j]) best = i2;
          gx[best * c + j] += g[j];
        }
        break;
      }
      case OpKind::Aggregate: {
        const std::size_t c = node.value.cols();
        std::vector<std::size_t> indeg(node.node_count, 0);
        for (const auto& [s, t] : *node.edges) ++indeg[t];
        auto& gx = touch(node.args[0]);
        for (const auto& [s, t] : *node.edges) {
          const double inv = 1.0 / static_cast<double>(indeg[t]);
          for (std::size_t j = 0; j < c; ++j) gx[s * c + j] += g[t * c + j] * inv;
        }
        break;
      }
      case OpKind::AttnMix: {
        const Tensor& w = arg(node, 0);
        const Tensor& v = arg(node, 1);
        const std::size_t m = w.rows(), k = w.cols(), n = v.cols();
        if (nodes_[node.args[0]].needs_grad) {
          auto& gw = touch(node.args[0]);
          for (std::size_t i2 = 0; i2 < m; ++i2)
            for (std::size_t t = 0; t < k; ++t) {
              double s = 0.0;
              for (std::size_t j = 0; j < n; ++j) s += g[i2 * n + j] * v.data()[t * n + j];
              gw[i2 * k + t] += s;
            }
        }
        if (nodes_[node.args[1]].needs_grad) {
          auto& gv = touch(node.args[1]);
          for (std::size_t t = 0; t < k; ++t)
            for (std::size_t j = 0; j < n; ++j) {
              double s = 0.0;
              for (std::size_t i2 = 0; i2 < m; ++i2) s += w.data()[i2 * k + t] * g[i2 * n + j];
              gv[t * n + j] += s;
            }
        }
        break;
      }
      case OpKind::CrossEntropy: {
        const Tensor& l = arg(node, 0);
        const std::size_t c = l.cols();
        double mx = -HUGE_VAL;
        for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, l.data()[j]);
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += std::exp(l.data()[j] - mx);
        auto& gx = touch(node.args[0]);
        for (std::size_t j = 0; j < c; ++j) {
          const double p = std::exp(l.data()[j] - mx) / acc;
          const double onehot = (static_cast<int>(j) == node.label) ? 1.0 : 0.0;
          gx[j] += g[0] * (p - onehot);
        }
        break;
      }
      case OpKind::Leaf:
        break;
    }
  }

  std::map<ValueId, Tensor> out;
  for (ValueId i = 0; i <= loss_id; ++i) {
    const Node& node = nodes_[i];
    if (node.op != OpKind::Leaf || !node.value.requires_grad()) continue;
    if (has_grad[i]) {
      out.emplace(i, Tensor(node.value.shape(), std::move(grads[i])));
    } else {
      out.emplace(i, Tensor::zeros(node.value.shape()));
    }
  }
  return out;
}

bool Tape::replay_matches() const {
  for (const Node& node : nodes_) {
    if (node.op == OpKind::Leaf) continue;
    Tensor again = compute(node);
    if (!again.same_shape(node.value)) return false;
    if (std::memcmp(again.data().data(), node.value.data().data(),
                    again.numel() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace factweave

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "factweave/rgcn.hpp"
#include "factweave/rng.hpp"

using namespace factweave;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, bool requires_grad = false) {
  std::vector<double> data(r * c);
  for (double& v : data) v = rng.uniform(-1.0, 1.0);
  return Tensor({r, c}, std::move(data), requires_grad);
}

struct LayerFixture {
  std::array<EdgeList, kRelationCount> edges;
  std::array<Tensor, kRelationCount> rel_weights;
  Tensor self_weight;
  Tensor h;
};

LayerFixture random_layer_fixture(Rng& rng, std::size_t max_nodes, std::size_t d) {
  LayerFixture fx;
  const std::size_t n = 2 + rng.uniform_index(max_nodes - 1);
  fx.h = random_matrix(n, d, rng);
  fx.self_weight = random_matrix(d, d, rng, true);
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    fx.rel_weights[r] = random_matrix(d, d, rng, true);
    const std::size_t count = 1 + rng.uniform_index(2 * n);
    for (std::size_t e = 0; e < count; ++e) {
      fx.edges[r].emplace_back(rng.uniform_index(n), rng.uniform_index(n));
    }
  }
  return fx;
}

RgcnLayerIds register_layer(Tape& tape, const LayerFixture& fx) {
  RgcnLayerIds layer;
  layer.self_weight = tape.leaf(fx.self_weight);
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    layer.relations.push_back(
        {tape.leaf(fx.rel_weights[r]), std::make_shared<const EdgeList>(fx.edges[r])});
  }
  return layer;
}

// Dense adjacency-matrix oracle: gelu(sum_r Dr^-1 Ar (H Wr) + H W0),
// computed with plain nested loops.
std::vector<double> dense_oracle(const LayerFixture& fx) {
  const std::size_t n = fx.h.rows(), d = fx.h.cols();
  auto matmul = [&](const Tensor& a, const Tensor& b) {
    std::vector<double> out(a.rows() * b.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < b.cols(); ++j)
        for (std::size_t t = 0; t < a.cols(); ++t) out[i * b.cols() + j] += a.at(i, t) * b.at(t, j);
    return out;
  };

  std::vector<double> acc = matmul(fx.h, fx.self_weight);
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    std::vector<double> projected = matmul(fx.h, fx.rel_weights[r]);
    // Dense normalized adjacency.
    std::vector<double> a_norm(n * n, 0.0);
    std::vector<double> indeg(n, 0.0);
    for (const auto& [s, t] : fx.edges[r]) indeg[t] += 1.0;
    for (const auto& [s, t] : fx.edges[r]) a_norm[t * n + s] += 1.0 / indeg[t];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < n; ++t) s += a_norm[i * n + t] * projected[t * d + j];
        acc[i * d + j] += s;
      }
  }
  for (double& v : acc) v = gelu_scalar(v);
  return acc;
}

}  // namespace

TEST_CASE("edgeless graph in eval mode reduces to gelu of the self transform") {
  Rng rng(1);
  const std::size_t n = 4, d = 6;
  Tensor h = random_matrix(n, d, rng);
  Tensor w0 = random_matrix(d, d, rng);

  Tape tape;
  RgcnLayerIds layer;
  layer.self_weight = tape.leaf(w0);
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    layer.relations.push_back({layer.self_weight, std::make_shared<const EdgeList>()});
  }
  const Tensor& out = tape.value(rgcn_layer(tape, tape.constant(h), layer, n, nullptr));

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < d; ++t) s += h.at(i, t) * w0.at(t, j);
      CHECK(out.at(i, j) == doctest::Approx(gelu_scalar(s)).epsilon(1e-14));
    }
}

TEST_CASE("zero self weight with a single neighbor gives gelu(W_r h_j)") {
  Rng rng(2);
  const std::size_t d = 5;
  Tensor h = random_matrix(2, d, rng);
  Tensor w_r = random_matrix(d, d, rng);

  Tape tape;
  RgcnLayerIds layer;
  layer.self_weight = tape.constant(Tensor::zeros({d, d}));
  layer.relations.push_back(
      {tape.leaf(w_r), std::make_shared<const EdgeList>(EdgeList{{0, 1}})});
  const Tensor& out = tape.value(rgcn_layer(tape, tape.constant(h), layer, 2, nullptr));

  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) s += h.at(0, t) * w_r.at(t, j);
    CHECK(out.at(1, j) == doctest::Approx(gelu_scalar(s)).epsilon(1e-14));
    // Node 0 has no incoming edges and a zero self term.
    CHECK(out.at(0, j) == doctest::Approx(gelu_scalar(0.0)));
  }
}

TEST_CASE("sparse layer matches the dense adjacency oracle") {
  Rng rng(33);
  for (int trial = 0; trial < 30; ++trial) {
    LayerFixture fx = random_layer_fixture(rng, 12, 8);
    Tape tape;
    RgcnLayerIds layer = register_layer(tape, fx);
    const Tensor& out =
        tape.value(rgcn_layer(tape, tape.constant(fx.h), layer, fx.h.rows(), nullptr));
    std::vector<double> expected = dense_oracle(fx);
    for (std::size_t i = 0; i < out.numel(); ++i) {
      CHECK(std::abs(out.data()[i] - expected[i]) <= 1e-10);
    }
  }
}

TEST_CASE("rgcn_forward with zero layers is the identity") {
  Rng rng(4);
  Tensor h = random_matrix(3, 4, rng);
  Tape tape;
  ValueId h0 = tape.constant(h);
  CHECK(rgcn_forward(tape, h0, {}, 3, nullptr) == h0);
}

TEST_CASE("rgcn_forward equals manually chained layers") {
  Rng rng(5);
  const std::size_t d = 8, n = 5;
  LayerFixture fx = random_layer_fixture(rng, 5, d);
  while (fx.h.rows() != n) fx = random_layer_fixture(rng, 5, d);

  Tape tape;
  std::vector<RgcnLayerIds> layers;
  for (int l = 0; l < 3; ++l) layers.push_back(register_layer(tape, fx));

  ValueId h0 = tape.constant(fx.h);
  ValueId composed = rgcn_forward(tape, h0, layers, n, nullptr);
  ValueId manual = h0;
  for (int l = 0; l < 3; ++l) manual = rgcn_layer(tape, manual, layers[l], n, nullptr);
  CHECK(tape.value(composed).data() == tape.value(manual).data());
  CHECK(tape.value(composed).shape() == tape.value(manual).shape());
}

TEST_CASE("permutation equivariance is exact in eval mode") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    LayerFixture fx = random_layer_fixture(rng, 9, 6);
    const std::size_t n = fx.h.rows(), d = fx.h.cols();

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);

    // Permuted copy: row perm[i] of h' is row i of h; edges relabeled.
    LayerFixture fx2 = fx;
    std::vector<double> hd(n * d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) hd[perm[i] * d + j] = fx.h.at(i, j);
    fx2.h = Tensor({n, d}, std::move(hd));
    for (std::size_t r = 0; r < kRelationCount; ++r) {
      for (auto& [s, t] : fx2.edges[r]) {
        s = perm[s];
        t = perm[t];
      }
    }

    Tape t1, t2;
    const Tensor& out1 = t1.value(
        rgcn_layer(t1, t1.constant(fx.h), register_layer(t1, fx), n, nullptr));
    const Tensor& out2 = t2.value(
        rgcn_layer(t2, t2.constant(fx2.h), register_layer(t2, fx2), n, nullptr));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        CHECK(out2.at(perm[i], j) == out1.at(i, j));  // bit-exact
      }
  }
}

TEST_CASE("locality: nodes beyond L hops cannot influence a row") {
  // Chain 0 -> 1 -> 2 -> 3 under one relation; with L = 2 layers, node 0
  // cannot reach node 3.
  Rng rng(7);
  const std::size_t n = 4, d = 5;
  Tensor h = random_matrix(n, d, rng);
  auto edges = std::make_shared<const EdgeList>(EdgeList{{0, 1}, {1, 2}, {2, 3}});

  auto run = [&](const Tensor& input) {
    Tape tape;
    std::vector<RgcnLayerIds> layers;
    Rng wrng(8);
    for (int l = 0; l < 2; ++l) {
      RgcnLayerIds layer;
      layer.self_weight = tape.leaf(random_matrix(d, d, wrng));
      layer.relations.push_back({tape.leaf(random_matrix(d, d, wrng)), edges});
      layers.push_back(layer);
    }
    return tape.value(rgcn_forward(tape, tape.constant(input), layers, n, nullptr)).data();
  };

  std::vector<double> base = run(h);
  std::vector<double> zeroed_data = h.data();
  for (std::size_t j = 0; j < d; ++j) zeroed_data[j] = 0.0;  // zero node 0
  std::vector<double> changed = run(Tensor({n, d}, zeroed_data));

  for (std::size_t j = 0; j < d; ++j) {
    CHECK(changed[3 * d + j] == base[3 * d + j]);  // row 3 untouched, bit-exact
  }
}

TEST_CASE("shape is preserved for any depth and eval is deterministic") {
  Rng rng(9);
  LayerFixture fx = random_layer_fixture(rng, 7, 6);
  const std::size_t n = fx.h.rows();

  auto run = [&] {
    Tape tape;
    std::vector<RgcnLayerIds> layers;
    for (int l = 0; l < 3; ++l) layers.push_back(register_layer(tape, fx));
    return tape.value(rgcn_forward(tape, tape.constant(fx.h), layers, n, nullptr));
  };
  Tensor out1 = run(), out2 = run();
  CHECK(out1.shape() == fx.h.shape());
  CHECK(out1.data() == out2.data());
}

TEST_CASE("rgcn gradients pass finite differences on a 5-node graph") {
  Rng rng(10);
  const std::size_t n = 5, d = 4;
  Tensor h = random_matrix(n, d, rng);
  Tensor target = random_matrix(n, d, rng);
  LayerFixture fx = random_layer_fixture(rng, 5, d);
  while (fx.h.rows() != n) fx = random_layer_fixture(rng, 5, d);

  // Loss = sum(layer(h) * target); checks every W_r and W_0.
  auto loss_with = [&](const LayerFixture& params) {
    Tape tape;
    RgcnLayerIds layer = register_layer(tape, params);
    ValueId out = rgcn_layer(tape, tape.constant(h), layer, n, nullptr);
    return tape.value(tape.sum(tape.mul(out, tape.constant(target)))).item();
  };

  Tape tape;
  RgcnLayerIds layer = register_layer(tape, fx);
  ValueId out = rgcn_layer(tape, tape.constant(h), layer, n, nullptr);
  ValueId loss = tape.sum(tape.mul(out, tape.constant(target)));
  auto grads = tape.backward(loss);

  const double eps = 1e-5;
  auto check_tensor = [&](Tensor& stored, ValueId leaf) {
    const Tensor analytic = grads.at(leaf);
    for (std::size_t i = 0; i < stored.numel(); ++i) {
      std::vector<double> plus = stored.data(), minus = stored.data();
      plus[i] += eps;
      minus[i] -= eps;
      Tensor saved = stored;
      stored = Tensor(stored.shape(), plus, true);
      const double fp = loss_with(fx);
      stored = Tensor(stored.shape(), minus, true);
      const double fm = loss_with(fx);
      stored = saved;
      const double fd = (fp - fm) / (2 * eps);
      const double an = analytic.data()[i];
      CHECK(std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)}) < 1e-4);
    }
  };

  check_tensor(fx.self_weight, layer.self_weight);
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    check_tensor(fx.rel_weights[r], layer.relations[r].weight);
  }
}

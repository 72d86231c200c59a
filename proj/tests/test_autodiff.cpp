#include <gtest/gtest.h>

#include <cstdint>
#include <memory>
#include <set>

#include "invlab/autodiff.hpp"

using namespace invlab;

namespace {

Tensor random_tensor(Random& rng, std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// Values bounded away from zero so ReLU kinks never sit within h of an input.
Tensor away_from_zero(Random& rng, std::vector<int> shape) {
  Tensor t = random_tensor(rng, std::move(shape), 0.1, 1.0);
  for (double& v : t.data)
    if (rng.bit()) v = -v;
  return t;
}

// Direct O(n^2) circular convolution as the reference.
Tensor conv_reference(const Tensor& x, const Tensor& K, const Tensor& b) {
  int B = x.shape[0], I = x.shape[1], n = x.shape[2], O = K.shape[0];
  Tensor y({B, O, n});
  for (int s = 0; s < B; ++s)
    for (int o = 0; o < O; ++o)
      for (int t = 0; t < n; ++t) {
        double acc = b.data[o];
        for (int i = 0; i < I; ++i)
          for (int u = 0; u < n; ++u) acc += K.data[(o * I + i) * n + u] * x.data[(s * I + i) * n + ((t - u) % n + n) % n];
        y.data[(s * O + o) * n + t] = acc;
      }
  return y;
}

}  // namespace

TEST(Tensor, StorageIsPacketAligned) {
  // Allocations of odd sizes in between must not shift where reductions split.
  std::vector<std::unique_ptr<double[]>> churn;
  for (int i = 1; i < 64; ++i) {
    churn.emplace_back(new double[i]);
    Tensor t({i});
    EXPECT_EQ(reinterpret_cast<std::uintptr_t>(t.data.data()) % EIGEN_MAX_ALIGN_BYTES, 0u);
  }
}

TEST(Tape, ReluSumGradient) {
  Tape t;
  Tensor w({3});
  w.data = {1.0, -2.0, 3.0};
  Var p = t.parameter(w);
  Var out = sum(relu(p));
  EXPECT_EQ(out.value().item(), 4.0);
  t.backward(out);
  EXPECT_EQ(p.grad().data, (Tensor::Storage{1.0, 0.0, 1.0}));
}

TEST(Tape, BackwardVisitsEachNodeOnce) {
  Tape t;
  Random rng(1);
  Var a = t.parameter(random_tensor(rng, {2, 2}));
  Var c = t.constant(random_tensor(rng, {2, 2}));
  Var out = sum(multiply(add(a, c), a));
  t.backward(out);
  // Nodes needing a gradient: a, add, multiply, sum.
  EXPECT_EQ(t.backward_visits(), 4);
  EXPECT_EQ(c.grad().size(), 0u);
}

TEST(Tape, ShapeErrors) {
  Tape t;
  Var a = t.parameter(Tensor({2, 3}));
  Var b = t.parameter(Tensor({2, 3}));
  EXPECT_THROW(matmul(a, b), ShapeError);
  EXPECT_THROW(add(a, t.constant(Tensor({2}))), ShapeError);
  EXPECT_NO_THROW(add(a, t.constant(Tensor({3}))));
  EXPECT_THROW(multiply(a, t.constant(Tensor({3, 2}))), ShapeError);
  EXPECT_THROW(reshape(a, {4}), ShapeError);
  EXPECT_THROW(segment_mean(a, 4), ShapeError);
  EXPECT_THROW(t.backward(a), ShapeError);
  EXPECT_THROW(circular_conv(t.constant(Tensor({1, 2, 4})), t.parameter(Tensor({3, 2, 5})), t.parameter(Tensor({3}))),
               ShapeError);
}

TEST(GradCheck, MatmulChainOnRandomFiveByFive) {
  Random rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Tensor> in = {random_tensor(rng, {5, 5}), random_tensor(rng, {5, 5}), random_tensor(rng, {5, 5})};
    double err = gradcheck([](Tape&, const std::vector<Var>& v) { return sum(matmul(matmul(v[0], v[1]), v[2])); }, in);
    EXPECT_LT(err, 1e-6);
  }
}

TEST(GradCheck, EveryOpOnRandomShapes) {
  Random rng(3);
  for (int trial = 0; trial < 3; ++trial) {
    int r = rng.integer(2, 6), c = rng.integer(2, 6), k = rng.integer(2, 5);
    auto check = [&](const TapeFunction& fn, std::vector<Tensor> in) { EXPECT_LT(gradcheck(fn, std::move(in)), 1e-5); };
    check([](Tape&, const std::vector<Var>& v) { return sum(multiply(matmul(v[0], v[1]), matmul(v[0], v[1]))); },
          {random_tensor(rng, {r, k}), random_tensor(rng, {k, c})});
    check([](Tape&, const std::vector<Var>& v) { return sum(multiply(add(v[0], v[1]), v[0])); },
          {random_tensor(rng, {r, c}), random_tensor(rng, {c})});
    check([](Tape&, const std::vector<Var>& v) { return sum(multiply(add(v[0], v[1]), v[1])); },
          {random_tensor(rng, {r, c}), random_tensor(rng, {r, c})});
    check([](Tape&, const std::vector<Var>& v) { return mean(multiply(sub(v[0], v[1]), v[0])); },
          {random_tensor(rng, {r, c}), random_tensor(rng, {r, c})});
    check([](Tape&, const std::vector<Var>& v) { return sum(multiply(relu(v[0]), v[1])); },
          {away_from_zero(rng, {r, c}), random_tensor(rng, {r, c})});
    check([](Tape&, const std::vector<Var>& v) { return sum(multiply(scale(v[0], -2.5), v[0])); },
          {random_tensor(rng, {r, c})});
    check(
        [r, c](Tape&, const std::vector<Var>& v) {
          Var y = reshape(v[0], {c, r});
          return sum(multiply(y, y));
        },
        {random_tensor(rng, {r, c})});
    check(
        [](Tape&, const std::vector<Var>& v) {
          Var m = row_mean(v[0]);
          return sum(multiply(m, m));
        },
        {random_tensor(rng, {r, 2, c})});
    check(
        [](Tape&, const std::vector<Var>& v) {
          Var m = segment_mean(v[0], 3);
          return sum(multiply(m, m));
        },
        {random_tensor(rng, {3 * r, c})});
    auto shifts = std::make_shared<std::vector<Eigen::MatrixXd>>();
    for (int g = 0; g < r; ++g) shifts->push_back(Eigen::MatrixXd::Random(3, 3));
    ShiftBatch sb = shifts;
    check(
        [sb](Tape&, const std::vector<Var>& v) {
          Var y = graph_shift(v[0], sb);
          return sum(multiply(y, y));
        },
        {random_tensor(rng, {3 * r, c})});
    check(
        [](Tape& t, const std::vector<Var>& v) { return mse_loss(v[0], t.constant(Tensor({4}, 0.5))); },
        {random_tensor(rng, {4})});
  }
}

TEST(CircularConv, MatchesDirectSumAndGradients) {
  Random rng(4);
  for (int n : {1, 2, 5, 6, 8}) {
    Tensor x = random_tensor(rng, {2, 3, n}), K = random_tensor(rng, {4, 3, n}), b = random_tensor(rng, {4});
    Tape t;
    Var y = circular_conv(t.constant(x), t.constant(K), t.constant(b));
    Tensor ref = conv_reference(x, K, b);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.value().data[i], ref.data[i], 1e-12);
    double err = gradcheck(
        [](Tape&, const std::vector<Var>& v) {
          Var z = circular_conv(v[0], v[1], v[2]);
          return sum(multiply(z, z));
        },
        {x, K, b});
    EXPECT_LT(err, 1e-5) << "n=" << n;
  }
}

TEST(CircularConv, OneHotKernelIsCyclicShift) {
  int n = 7, s = 3;
  Random rng(5);
  Tensor x = random_tensor(rng, {1, 1, n}), K({1, 1, n}), b({1});
  K.data[s] = 1.0;
  Tape t;
  Var xv = t.parameter(x);
  Var y = circular_conv(xv, t.constant(K), t.constant(b));
  for (int i = 0; i < n; ++i) EXPECT_NEAR(y.value().data[i], x.data[((i - s) % n + n) % n], 1e-12);
  // dx[j] = g[j + s]: the upstream gradient shifted back by s.
  Tensor w({1, 1, n});
  w.data[2] = 1.0;
  t.backward(sum(multiply(y, t.constant(w))));
  for (int i = 0; i < n; ++i) EXPECT_NEAR(xv.grad().data[i], i == (2 - s + n) % n ? 1.0 : 0.0, 1e-12);
}

TEST(Adam, FirstStepHandValue) {
  std::vector<Tensor> p = {Tensor::scalar(1.0)};
  AdamState st(p);
  std::vector<Tensor> g = {Tensor::scalar(2.0 * p[0].item())};
  adam_step(st, p, g, 0.1);
  EXPECT_NEAR(p[0].item(), 0.9, 1e-9);
  EXPECT_NEAR(p[0].item(), 1.0 - 0.1 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_EQ(st.t, 1);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Random rng(6);
  std::vector<Tensor> p = {random_tensor(rng, {3, 2})};
  auto before = p[0].data;
  AdamState st(p);
  adam_step(st, p, {Tensor({3, 2})}, 0.01);
  EXPECT_EQ(p[0].data, before);
  EXPECT_EQ(st.t, 1);
  EXPECT_THROW(adam_step(st, p, {Tensor({2, 3})}, 0.01), ShapeError);
}

TEST(Adam, IdenticalRunsAreBitwiseEqual) {
  auto run = [] {
    Random rng(7);
    Tensor A = random_tensor(rng, {4, 4}), y = random_tensor(rng, {4, 1});
    std::vector<Tensor> p = {random_tensor(rng, {4, 1})};
    AdamState st(p);
    std::vector<double> traj;
    for (int it = 0; it < 50; ++it) {
      Tape t;
      Var w = t.parameter(p[0]);
      Var loss = mse_loss(matmul(t.constant(A), w), t.constant(y));
      t.backward(loss);
      adam_step(st, p, {w.grad()}, 0.05);
      traj.push_back(loss.value().item());
    }
    return traj;
  };
  auto a = run(), b = run();
  EXPECT_EQ(a, b);
  EXPECT_LT(a.back(), a.front());
}

TEST(GradCheck, StandardSuiteCoversEveryOp) {
  auto rows = gradcheck_suite(11, 2);
  std::set<std::string> ops;
  for (const auto& r : rows) {
    ops.insert(r.op);
    EXPECT_LT(r.rel_error, 1e-5) << r.op << " " << r.shapes;
  }
  EXPECT_EQ(ops.size(), 12u);
  EXPECT_EQ(rows.size(), 24u);
  EXPECT_NEAR(adam_hand_step(), 0.9, 1e-9);
}

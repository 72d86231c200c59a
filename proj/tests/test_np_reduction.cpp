#include <gtest/gtest.h>

#include <sstream>

#include "invlab/np_reduction.hpp"

using namespace invlab;

namespace {

// Closed form of the clique network on a reduced graph, written from the bit
// vector directly: c + sum_j b_j sum_l l x_l relu(-1 - l a_j).
double closed_form(const CliqueGNN& g, const std::vector<int>& x) {
  double out = g.c;
  for (int j = 0; j < g.k; ++j)
    for (int l = 1; l <= static_cast<int>(x.size()); ++l)
      out += g.b[j] * l * x[l - 1] * std::max(0.0, -1.0 - l * g.a[j]);
  return out;
}

// Random halfspace whose margin on every point of {0,1}^n is at least 1e-6
// in magnitude, so sign comparisons are not decided by rounding.
Halfspace generic_halfspace(Random& rng, int n) {
  auto pts = all_points(n);
  for (;;) {
    Halfspace h;
    h.v = Eigen::VectorXd(n);
    for (int i = 0; i < n; ++i) h.v[i] = rng.normal();
    h.theta = rng.normal();
    double m = 1e300;
    for (const auto& p : pts) m = std::min(m, std::abs(halfspace_margin(h, p)));
    if (m > 1e-6) return h;
  }
}

Eigen::VectorXd minus_ones(int n) { return Eigen::VectorXd::Constant(reduced_node_count(n), -1.0); }

}  // namespace

TEST(Reduction, PrintedMatrixForOneZeroOne) {
  Adjacency expected(6, 6);
  expected << 1, 0, 0, 0, 0, 0,
              0, 0, 0, 0, 0, 0,
              0, 0, 0, 0, 0, 0,
              0, 0, 0, 1, 1, 1,
              0, 0, 0, 1, 1, 1,
              0, 0, 0, 1, 1, 1;
  EXPECT_EQ(reduce_point({1, 0, 1}), expected);
}

TEST(Reduction, TrivialPoints) {
  for (int n = 1; n <= 6; ++n) {
    int N = reduced_node_count(n);
    EXPECT_EQ(reduce_point(std::vector<int>(n, 0)), Adjacency::Zero(N, N));
    Adjacency full = reduce_point(std::vector<int>(n, 1));
    Eigen::VectorXi deg = full.rowwise().sum();
    for (int l = 1; l <= n; ++l)
      for (int u = l * (l - 1) / 2; u < l * (l + 1) / 2; ++u) EXPECT_EQ(deg[u], l);
  }
}

TEST(Reduction, IndicatorRecoversEveryPoint) {
  for (int n = 1; n <= 6; ++n)
    for (const auto& x : all_points(n)) EXPECT_EQ(clique_indicator(reduce_point(x), n), x);
}

TEST(Reduction, IndicatorIgnoresNodeOrder) {
  Adjacency A = reduce_point({0, 1, 1});
  std::vector<int> img = {5, 3, 1, 0, 2, 4};
  EXPECT_EQ(clique_indicator(permute_adjacency(A, img), 3), (std::vector<int>{0, 1, 1}));
  Adjacency path = Adjacency::Zero(3, 3);
  path(0, 1) = path(1, 0) = path(1, 2) = path(2, 1) = 1;
  EXPECT_THROW(clique_indicator(path, 2), InvalidArgument);
}

TEST(Reduction, DatasetCopiesLabelsAndFeatures) {
  HalfspaceDataset ds{2, {{1, 1}, {0, 1}}, {1, -1}};
  auto gs = reduce_halfspace_to_graphs(ds);
  ASSERT_EQ(gs.size(), 2u);
  EXPECT_EQ(gs[1].y, -1);
  EXPECT_EQ(gs[0].x, Eigen::VectorXd::Constant(3, -1.0));
  HalfspaceDataset bad{2, {{1, 2}}, {1}};
  EXPECT_THROW(reduce_halfspace_to_graphs(bad), InvalidArgument);
}

TEST(CliqueGnn, TrivialOutputs) {
  Random rng(1);
  CliqueGNN g{3, Eigen::VectorXd::Random(3), Eigen::VectorXd::Zero(3), 0.7};
  EXPECT_EQ(eval_clique_gnn(g, minus_ones(3), reduce_point({1, 1, 1})), 0.7);
  g.b = Eigen::VectorXd::Random(3);
  EXPECT_EQ(eval_clique_gnn(g, minus_ones(3), reduce_point({0, 0, 0})), 0.7);
  EXPECT_THROW(eval_clique_gnn(g, Eigen::VectorXd::Zero(5), reduce_point({0, 0, 0})), DimensionMismatch);
}

TEST(CliqueGnn, GraphPathMatchesClosedForm) {
  Random rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    CliqueGNN g{3, Eigen::VectorXd(3), Eigen::VectorXd(3), rng.normal()};
    for (int j = 0; j < 3; ++j) {
      g.a[j] = rng.uniform(-3.0, 1.0);
      g.b[j] = rng.normal();
    }
    std::vector<int> x = {1, 0, 1};
    double direct = eval_clique_gnn(g, minus_ones(3), reduce_point(x));
    EXPECT_NEAR(direct, closed_form(g, x), 1e-12);
    EXPECT_NEAR(direct, eval_clique_gnn_on_indicator(g, x), 1e-12);
  }
}

TEST(ReductionMatrix, UpperTriangularWithNonzeroDiagonal) {
  for (int n = 1; n <= 12; ++n) {
    Eigen::MatrixXd M = reduction_matrix(reduction_channel_slopes(n), n);
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        if (l < j) {
          EXPECT_EQ(M(j, l), 0.0);
        } else {
          EXPECT_GT(M(j, l), 0.0);
        }
      }
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(n, -1.0, 2.0);
    auto g = halfspace_to_gnn_weights(v, 0.3, n);
    EXPECT_LT((M.transpose() * g.b - v).norm(), 1e-8);
  }
}

TEST(HalfspaceToGnn, TwoBitAnd) {
  Eigen::Vector2d v(1.0, 1.0);
  auto g = halfspace_to_gnn_weights(v, 1.5, 2);
  HalfspaceDataset ds{2, {{1, 1}, {1, 0}, {0, 1}, {0, 0}}, {1, -1, -1, -1}};
  EXPECT_EQ(agreement(ds.labels, gnn_predictions(g, reduce_halfspace_to_graphs(ds))), 1.0);
}

TEST(HalfspaceToGnn, ConstantPositive) {
  auto g = halfspace_to_gnn_weights(Eigen::VectorXd::Zero(4), -1.0, 4);
  HalfspaceDataset ds{4, all_points(4), std::vector<int>(16, 1)};
  EXPECT_EQ(agreement(ds.labels, gnn_predictions(g, reduce_halfspace_to_graphs(ds))), 1.0);
}

TEST(HalfspaceToGnn, RandomPointsAtEightBits) {
  Random rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    Halfspace h = generic_halfspace(rng, 8);
    HalfspaceDataset ds{8, {}, {}};
    for (int i = 0; i < 50; ++i) {
      std::vector<int> x(8);
      for (int& b : x) b = rng.bit();
      ds.points.push_back(x);
      ds.labels.push_back(sign_label(halfspace_margin(h, x)));
    }
    auto g = halfspace_to_gnn_weights(h.v, h.theta, 8);
    EXPECT_EQ(agreement(ds.labels, gnn_predictions(g, reduce_halfspace_to_graphs(ds))), 1.0);
  }
}

TEST(HalfspaceToGnn, ExhaustiveSignEquivalence) {
  Random rng(3);
  for (int n = 1; n <= 6; ++n)
    for (int trial = 0; trial < 10; ++trial) {
      Halfspace h = generic_halfspace(rng, n);
      auto g = halfspace_to_gnn_weights(h.v, h.theta, n);
      for (const auto& x : all_points(n)) {
        double out = eval_clique_gnn(g, minus_ones(n), reduce_point(x));
        EXPECT_EQ(sign_label(out), sign_label(halfspace_margin(h, x)));
        EXPECT_NEAR(out, halfspace_margin(h, x), 1e-9);
      }
      Halfspace back = gnn_to_halfspace(g, n);
      EXPECT_LT((back.v - h.v).norm(), 1e-9);
      EXPECT_NEAR(back.theta, h.theta, 1e-12);
    }
}

TEST(GnnToHalfspace, ExhaustiveSignEquivalenceFromRandomNetworks) {
  Random rng(4);
  for (int n = 1; n <= 6; ++n)
    for (int trial = 0; trial < 10; ++trial) {
      CliqueGNN g{n, Eigen::VectorXd(n), Eigen::VectorXd(n), rng.normal()};
      for (int j = 0; j < n; ++j) {
        g.a[j] = rng.uniform(-2.0, 0.5);
        g.b[j] = rng.normal();
      }
      Halfspace h = gnn_to_halfspace(g, n);
      for (const auto& x : all_points(n)) {
        double out = eval_clique_gnn(g, minus_ones(n), reduce_point(x));
        EXPECT_NEAR(out, halfspace_margin(h, x), 1e-9);
        if (std::abs(out) > 1e-9) {
          EXPECT_EQ(sign_label(out), sign_label(halfspace_margin(h, x)));
        }
      }
    }
}

TEST(GnnToHalfspace, ZeroReadout) {
  CliqueGNN g{3, Eigen::VectorXd::Constant(3, -1.0), Eigen::VectorXd::Zero(3), 2.5};
  Halfspace h = gnn_to_halfspace(g, 3);
  EXPECT_EQ(h.v, Eigen::VectorXd::Zero(3));
  EXPECT_EQ(h.theta, -2.5);
}

TEST(GnnToHalfspace, SingleCliqueSensitivity) {
  Random rng(5);
  int n = 5;
  CliqueGNN g{n, Eigen::VectorXd(n), Eigen::VectorXd(n), 0.1};
  for (int j = 0; j < n; ++j) {
    g.a[j] = rng.uniform(-2.0, 0.0);
    g.b[j] = rng.normal();
  }
  Halfspace h = gnn_to_halfspace(g, n);
  for (const auto& x : all_points(n))
    for (int l = 0; l < n; ++l) {
      if (x[l]) continue;
      auto y = x;
      y[l] = 1;
      double diff = eval_clique_gnn(g, minus_ones(n), reduce_point(y)) - eval_clique_gnn(g, minus_ones(n), reduce_point(x));
      EXPECT_NEAR(diff, h.v[l], 1e-10);
    }
}

TEST(Agreement, Examples) {
  std::vector<int> y = {1, -1, 1, 1};
  EXPECT_EQ(agreement(y, y), 1.0);
  std::vector<int> neg = {-1, 1, -1, -1};
  EXPECT_EQ(agreement(y, neg), 0.0);
  Random rng(6);
  std::vector<int> a(10000), b(10000);
  for (int i = 0; i < 10000; ++i) {
    a[i] = rng.bit() ? 1 : -1;
    b[i] = rng.bit() ? 1 : -1;
  }
  EXPECT_NEAR(agreement(a, b), 0.5, 0.02);
  EXPECT_THROW(agreement(y, {1}), DimensionMismatch);
}

TEST(HalfspaceCsv, RoundTrip) {
  HalfspaceDataset ds{3, {{1, 0, 1}, {0, 0, 0}}, {1, -1}};
  std::stringstream ss;
  write_halfspace_csv(ss, ds);
  EXPECT_EQ(ss.str(), "x0,x1,x2,label\n1,0,1,1\n0,0,0,-1\n");
  auto back = read_halfspace_csv(ss);
  EXPECT_EQ(back.points, ds.points);
  EXPECT_EQ(back.labels, ds.labels);
  std::istringstream bad("1,2,1\n");
  EXPECT_THROW(read_halfspace_csv(bad), ParseError);
}

TEST(EdgeList, ReducedGraphRoundTrip) {
  Adjacency A = reduce_point({1, 0, 1});
  std::stringstream ss;
  write_edge_list(ss, A);
  EXPECT_EQ(read_edge_list(ss, 6), A);
}

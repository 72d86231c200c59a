#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "invlab/orthopoly.hpp"

using namespace invlab;

namespace {

double max_dev_from_identity(const Eigen::MatrixXd& G) {
  return (G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
}

std::vector<double> chi2_3_moments(int K) {
  std::vector<double> m(K + 1, 1.0);
  for (int j = 1; j <= K; ++j) m[j] = m[j - 1] * (3 + 2 * (j - 1));
  return m;
}

}  // namespace

TEST(MultiIndex, GradedLexOrder) {
  auto all = enumerate_multi_indices(2, 2);
  std::vector<std::vector<int>> want = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  ASSERT_EQ(all.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_EQ(all[i].degrees, want[i]);
  EXPECT_EQ(enumerate_multi_indices(6, 3).size(), 84u);
  EXPECT_EQ(enumerate_multi_indices(3, 3, 1).size(), 19u);
}

TEST(Hermite, Values) {
  auto h = hermite_family(4);
  EXPECT_NEAR(h.eval(2, 1.0), 0.0, 1e-15);
  EXPECT_NEAR(h.eval(3, 0.0), 0.0, 1e-15);
  // He_4/sqrt(24) = (x^4 - 6x^2 + 3)/sqrt(24), from a symbolic oracle.
  const double want[] = {0.6123724356957945, 0.0, -1.224744871391589, 0.0, 0.2041241452319315};
  for (int k = 0; k <= 4; ++k) EXPECT_NEAR(h.coeffs[4][k], want[k], 1e-15);
  for (double x : {-2.5, -0.3, 0.7, 3.1})
    for (int t = 0; t <= 4; ++t) EXPECT_NEAR(h.eval(t, x), h.eval_monomial(t, x), 1e-12);
}

TEST(Hermite, GaussRuleMatchesReferenceNodes) {
  // 20-point probabilists' Gauss-Hermite rule, weights normalized to mass 1.
  const double nodes[] = {0.3469641570813559, 1.042945348802751, 1.7452473208141268, 2.458663611172368,
                          3.1890148165533896, 3.9439673506573163, 4.734581334046055, 5.5787388058932015,
                          6.510590157013654,  7.619048541679758};
  const double weights[] = {0.2607930634495548,    0.16173933398400003,    0.06150637206397696,
                            0.013997837447100996,  0.0018301031310804924,  0.00012882627996192942,
                            4.4021210902308646e-06, 6.127490259982928e-08, 2.4820623623151797e-10,
                            1.2578006724379264e-13};
  auto q = gauss_rule(hermite_family(2), 20);
  for (int i = 0; i < 10; ++i) {
    EXPECT_NEAR(q.nodes[10 + i], nodes[i], 1e-13);
    EXPECT_NEAR(q.weights[10 + i] / weights[i], 1.0, 1e-11);
  }
  auto h = hermite_family(1);
  double s = 0;
  for (int i = 0; i < 20; ++i) s += q.weights[i] * h.eval(1, q.nodes[i]) * h.eval(1, q.nodes[i]);
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Legendre, ShiftedClosedForms) {
  auto l = legendre_family(3, true);
  EXPECT_NEAR(l.eval(1, 1.0), std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(l.coeffs[1][0], -std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(l.coeffs[1][1], 2 * std::sqrt(3.0), 1e-15);
  const double r5 = std::sqrt(5.0), r7 = std::sqrt(7.0);
  EXPECT_NEAR(l.coeffs[2][0], r5, 1e-14);
  EXPECT_NEAR(l.coeffs[2][1], -6 * r5, 1e-14);
  EXPECT_NEAR(l.coeffs[2][2], 6 * r5, 1e-14);
  const double p3[] = {-r7, 12 * r7, -30 * r7, 20 * r7};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(l.coeffs[3][k], p3[k], 1e-13);
  for (double u : {0.0, 0.3, 0.9}) EXPECT_EQ(l.eval(0, u), 1.0);
}

TEST(Orthonormality, AllFamiliesToDegree16) {
  for (const auto& f : {hermite_family(16), legendre_family(16, false), legendre_family(16, true)})
    EXPECT_LT(max_dev_from_identity(quadrature_gram(f)), 1e-10) << marginal_name(f.marginal);
}

TEST(Orthonormality, CustomMomentFamily) {
  auto f = gram_schmidt_from_moments(chi2_3_moments(16), 6);
  EXPECT_LT(max_dev_from_identity(quadrature_gram(f)), 1e-10);
}

TEST(Orthonormality, CustomFamilyWithoutMomentsForDPlusOneNodesThrows) {
  EXPECT_THROW(quadrature_gram(gram_schmidt_from_moments(chi2_3_moments(12), 6)), InvalidArgument);
  EXPECT_LT(max_dev_from_identity(quadrature_gram(gram_schmidt_from_moments(chi2_3_moments(14), 6))), 1e-10);
}

TEST(GramSchmidt, UniformMomentsGiveShiftedLegendre) {
  auto gs = gram_schmidt_from_moments(marginal_moments(Marginal::ShiftedUniform, 6), 3);
  auto l = legendre_family(3, true);
  for (int t = 0; t <= 3; ++t)
    for (int k = 0; k <= t; ++k) EXPECT_NEAR(gs.coeffs[t][k], l.coeffs[t][k], 1e-10);
}

TEST(GramSchmidt, NormalMomentsGiveHermite) {
  auto gs = gram_schmidt_from_moments(marginal_moments(Marginal::StandardNormal, 16), 8);
  auto h = hermite_family(8);
  for (int t = 0; t <= 8; ++t)
    for (int k = 0; k <= t; ++k) EXPECT_NEAR(gs.coeffs[t][k], h.coeffs[t][k], 1e-10);
}

TEST(GramSchmidt, Chi2ThreeAgainstSymbolic) {
  auto f = gram_schmidt_from_moments(chi2_3_moments(4), 2);
  EXPECT_NEAR(f.coeffs[1][0], -std::sqrt(6.0) / 2, 1e-14);
  EXPECT_NEAR(f.coeffs[1][1], std::sqrt(6.0) / 6, 1e-14);
  const double r30 = std::sqrt(30.0);
  EXPECT_NEAR(f.coeffs[2][0], r30 / 4, 1e-13);
  EXPECT_NEAR(f.coeffs[2][1], -r30 / 6, 1e-13);
  EXPECT_NEAR(f.coeffs[2][2], r30 / 60, 1e-14);
}

TEST(GramSchmidt, Idempotence) {
  // Each family's exact moments reproduce its table (relative to row scale).
  struct Case {
    OrthoFamily f;
    int D;
  };
  for (auto& c : {Case{hermite_family(8), 8}, Case{legendre_family(8, false), 8}, Case{legendre_family(5, true), 5}}) {
    auto gs = gram_schmidt_from_moments(marginal_moments(c.f.marginal, 2 * c.D), c.D);
    for (int t = 0; t <= c.D; ++t)
      for (int k = 0; k <= t; ++k)
        EXPECT_NEAR(gs.coeffs[t][k], c.f.coeffs[t][k], 1e-9 * std::max(1.0, std::abs(c.f.coeffs[t][k])));
  }
  auto f = gram_schmidt_from_moments(chi2_3_moments(12), 6);
  auto again = gram_schmidt_from_moments(f.moments, 6);
  for (int t = 0; t <= 6; ++t)
    for (int k = 0; k <= t; ++k) EXPECT_NEAR(again.coeffs[t][k], f.coeffs[t][k], 1e-9 * std::abs(f.coeffs[t][k]));
}

TEST(GramSchmidt, PointMassIsSingular) {
  EXPECT_THROW(gram_schmidt_from_moments({1.0, 0.0, 0.0}, 1), SingularMoments);
  EXPECT_THROW(gram_schmidt_from_moments(marginal_moments(Marginal::ShiftedUniform, 40), 12), SingularMoments);
  EXPECT_THROW(gram_schmidt_from_moments({2.0, 0.0, 1.0}, 1), InvalidArgument);
}

TEST(SquareExpansion, Hermite) {
  auto h = hermite_family(6);
  auto e1 = square_expansion(h, 1);
  ASSERT_EQ(e1.size(), 2u);
  EXPECT_NEAR(e1.at(0), 1.0, 1e-14);
  EXPECT_NEAR(e1.at(2), std::sqrt(2.0), 1e-14);
  auto e2 = square_expansion(h, 2);
  ASSERT_EQ(e2.size(), 3u);
  EXPECT_NEAR(e2.at(0), 1.0, 1e-14);
  EXPECT_NEAR(e2.at(2), 2 * std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(e2.at(4), std::sqrt(6.0), 1e-14);
  auto e3 = square_expansion(h, 3);
  EXPECT_NEAR(e3.at(2), 3 * std::sqrt(2.0), 1e-13);
  EXPECT_NEAR(e3.at(4), 3 * std::sqrt(6.0), 1e-13);
  EXPECT_NEAR(e3.at(6), 2 * std::sqrt(5.0), 1e-13);
  EXPECT_THROW(square_expansion(hermite_family(3), 2), DegreeOverflow);
}

TEST(SquareExpansion, ShiftedLegendre) {
  auto l = legendre_family(6, true);
  EXPECT_NEAR(square_expansion(l, 1).at(2), 2 / std::sqrt(5.0), 1e-14);
  auto e2 = square_expansion(l, 2);
  EXPECT_NEAR(e2.at(2), 2 * std::sqrt(5.0) / 7, 1e-13);
  EXPECT_NEAR(e2.at(4), 6.0 / 7, 1e-13);
  EXPECT_NEAR(square_expansion(l, 3).at(6), 100 * std::sqrt(13.0) / 429, 1e-12);
}

TEST(SquareExpansion, PointwiseConsistency) {
  Random rng(7);
  for (const auto& f : {hermite_family(16), legendre_family(16, false), legendre_family(16, true)}) {
    for (int t = 1; t <= 8; ++t) {
      auto e = square_expansion(f, t);
      for (int i = 0; i < 100; ++i) {
        double x = f.marginal == Marginal::StandardNormal ? rng.normal()
                   : f.marginal == Marginal::Uniform     ? rng.uniform(-1, 1)
                                                         : rng.uniform();
        double lhs = f.eval(t, x) * f.eval(t, x), rhs = 0;
        for (auto [j, c] : e) rhs += c * f.eval(j, x);
        EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(lhs)));
      }
    }
  }
}

TEST(TauD, Values) {
  EXPECT_NEAR(tau_d(hermite_family(4), 2), std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(tau_d(legendre_family(2, true), 1), 2 / std::sqrt(5.0), 1e-14);
  EXPECT_TRUE(std::isinf(tau_d(hermite_family(0), 0)));
  EXPECT_THROW(tau_d(hermite_family(5), 3), DegreeOverflow);
  for (const auto& f : {hermite_family(16), legendre_family(16, false), legendre_family(16, true)})
    for (int d = 1; d <= 8; ++d) EXPECT_GT(tau_d(f, d), 0.0);
}

TEST(ProductBasis, Eval) {
  ProductBasis b(hermite_family(4), 2);
  EXPECT_EQ(product_eval(ProductBasis(hermite_family(2), 3), MultiIndex{0, 0, 0}, {0.3, -2, 9}), 1.0);
  EXPECT_NEAR(product_eval(b, MultiIndex{1, 1}, {2, 3}), 6.0, 1e-14);
  EXPECT_NEAR(product_eval(b, MultiIndex{2, 0}, {1, 5}), 0.0, 1e-15);
  EXPECT_THROW(product_eval(b, MultiIndex{1, 1}, {1, 2, 3}), DimensionMismatch);
}

TEST(Serialization, RoundTrip) {
  for (const auto& f : {hermite_family(5), legendre_family(5, true), gram_schmidt_from_moments(chi2_3_moments(10), 4)}) {
    std::stringstream ss;
    write_family(ss, f);
    auto g = read_family(ss);
    EXPECT_EQ(g.marginal, f.marginal);
    ASSERT_EQ(g.max_degree, f.max_degree);
    for (int t = 0; t <= f.max_degree; ++t) {
      EXPECT_EQ(g.coeffs[t], f.coeffs[t]);
      EXPECT_NEAR(g.eval(t, 0.37), f.eval(t, 0.37), 1e-10);
    }
  }
  std::stringstream bad("marginal nope max_degree 1\n1\n0 1\n");
  EXPECT_THROW(read_family(bad), ParseError);
}

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "invlab/groups_frames.hpp"

using namespace invlab;

TEST(Permutation, ComposeInverseCycles) {
  auto r = Permutation::rotation(4, 1);
  EXPECT_EQ(r.image, (std::vector<int>{1, 2, 3, 0}));
  EXPECT_TRUE((r * r.inverse()).is_identity());
  EXPECT_EQ(r.cycles(), "(0 1 2 3)");
  EXPECT_EQ(Permutation::identity(3).cycles(), "()");
  EXPECT_EQ(Permutation::cycle(5, {0, 1}).cycles(), "(0 1)");
  EXPECT_EQ(r.image_str(), "[1 2 3 0]");
  EXPECT_THROW(Permutation({0, 0, 1}), InvalidArgument);
}

TEST(Permutation, RowAction) {
  Eigen::MatrixXd X(3, 1);
  X << 10, 20, 30;
  auto Y = act_rows(Permutation::rotation(3, 1), X);
  EXPECT_EQ(Y(1, 0), 10);
  EXPECT_EQ(Y(2, 0), 20);
  EXPECT_EQ(Y(0, 0), 30);
  auto g = Permutation::cycle(3, {0, 2}), h = Permutation::rotation(3, 1);
  EXPECT_TRUE(act_rows(g * h, X).isApprox(act_rows(g, act_rows(h, X))));
}

TEST(Group, Enumerate) {
  auto C4 = enumerate_group(cyclic_generators(4));
  EXPECT_EQ(C4.order(), 4u);
  EXPECT_TRUE(C4[0].is_identity());
  auto S4 = enumerate_group(symmetric_generators(4));
  EXPECT_EQ(S4.order(), 24u);
  EXPECT_TRUE(S4.verify_closed());
  EXPECT_THROW(enumerate_group(symmetric_generators(8), 1000), CapExceeded);
  EXPECT_EQ(enumerate_group(symmetric_generators(7)).order(), 5040u);
}

TEST(Group, ClosureAndInverses) {
  auto D6 = enumerate_group({Permutation::rotation(6, 1), Permutation({5, 4, 3, 2, 1, 0})});
  EXPECT_EQ(D6.order(), 12u);
  for (const auto& a : D6.elements()) {
    EXPECT_TRUE(D6.contains(a.inverse()));
    for (const auto& b : D6.elements()) EXPECT_TRUE(D6.contains(a * b));
  }
  EXPECT_THROW(PermGroup::from_elements(3, {Permutation::rotation(3, 1)}), InvalidArgument);
  EXPECT_EQ(PermGroup::from_elements(3, {Permutation::rotation(3, 1), Permutation::rotation(3, 2)}).order(), 3u);
}

TEST(FixedPoints, Examples) {
  auto r = Permutation::rotation(4, 1);
  EXPECT_EQ(fixed_points(r, r), 4);
  EXPECT_EQ(fixed_points(Permutation::identity(3), Permutation::cycle(3, {0, 1})), 1);
  EXPECT_EQ(fixed_points(Permutation::rotation(4, 1), Permutation::rotation(4, 3)), 0);
}

TEST(OrbitCensus, SymmetricFourBits) {
  auto c = orbit_census_boolean(Representation::bits(enumerate_group(symmetric_generators(4))), 1.0);
  EXPECT_EQ(c.orbit_sizes, (std::vector<std::uint64_t>{1, 1, 4, 4, 6}));
  EXPECT_DOUBLE_EQ(c.p_norm_sq, 70.0 / 256);
  EXPECT_DOUBLE_EQ(c.query_bound, 1.0 / (2 * 70.0 / 256));
}

TEST(OrbitCensus, CyclicFourBits) {
  auto c = orbit_census_boolean(Representation::bits(cyclic_group(4)), 0.5);
  EXPECT_EQ(c.num_orbits(), 6u);
  EXPECT_EQ(c.orbit_sizes, (std::vector<std::uint64_t>{1, 1, 2, 4, 4, 4}));
  EXPECT_DOUBLE_EQ(c.p_norm_sq, 54.0 / 256);
  std::ostringstream os;
  c.write_csv(os);
  EXPECT_EQ(os.str(), "orbit_size,count\n1,2\n2,1\n4,3\n");
}

TEST(OrbitCensus, DihedralSixBitsMatchesBruteForce) {
  // Independent brute-force orbit listing for D_6 on 6 bits.
  auto c = orbit_census_boolean(Representation::bits(6, {Permutation::rotation(6, 1), Permutation({5, 4, 3, 2, 1, 0})}), 1);
  EXPECT_EQ(c.orbit_sizes, (std::vector<std::uint64_t>{1, 1, 2, 3, 3, 6, 6, 6, 6, 6, 6, 6, 12}));
}

TEST(OrbitCensus, SignFlipIsTransitive) {
  auto c = orbit_census_boolean(Representation::sign_flip(10), 1.0);
  EXPECT_EQ(c.num_orbits(), 1u);
  EXPECT_EQ(c.orbit_sizes[0], 1024u);
  EXPECT_DOUBLE_EQ(c.p_norm_sq, 1.0);
}

TEST(OrbitCensus, GraphsUpToIsomorphism) {
  // Digraphs with loops on n unlabeled nodes: 2, 10, 104, 3044.
  const std::uint64_t want[] = {2, 10, 104, 3044};
  for (int n = 1; n <= 4; ++n) {
    auto c = orbit_census_boolean(Representation::graphs(n), 1.0);
    EXPECT_EQ(c.num_orbits(), want[n - 1]);
    std::uint64_t fact = 1;
    for (int i = 2; i <= n; ++i) fact *= i;
    for (auto s : c.orbit_sizes) EXPECT_EQ(fact % s, 0u);
  }
  EXPECT_THROW(orbit_census_boolean(Representation::graphs(5), 1.0), TooLarge);
  EXPECT_THROW(orbit_census_boolean(Representation::sign_flip(21), 1.0), TooLarge);
}

TEST(OrbitCensus, PartitionAndDivisibility) {
  for (auto gens : {cyclic_generators(8), symmetric_generators(6)}) {
    auto G = enumerate_group(gens);
    auto c = orbit_census_boolean(Representation::bits(G), 1.0);
    std::uint64_t total = 0;
    for (auto s : c.orbit_sizes) {
      total += s;
      EXPECT_EQ(G.order() % s, 0u);
    }
    EXPECT_EQ(total, c.domain_size);
    EXPECT_GT(c.p_norm_sq, 0.0);
    EXPECT_LE(c.p_norm_sq, 1.0);
  }
}

TEST(Necklace, BurnsideMatchesExhaustive) {
  EXPECT_EQ(necklace_count(4), 6u);
  EXPECT_EQ(necklace_count(1), 2u);
  // Binary necklace counts n = 1..16.
  const std::uint64_t known[] = {2, 3, 4, 6, 8, 14, 20, 36, 60, 108, 188, 352, 632, 1182, 2192, 4116};
  for (int n = 1; n <= 16; ++n) {
    EXPECT_EQ(necklace_count(n), known[n - 1]);
    EXPECT_EQ(orbit_census_boolean(Representation::bits(n, cyclic_generators(n)), 1.0).num_orbits(), necklace_count(n));
  }
  EXPECT_THROW(necklace_count(0), InvalidArgument);
}

TEST(Table1, SixteenBits) {
  auto rows = table1_rows(16);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_NEAR(rows[0].fraction, 0.196380615234375, 1e-15);
  EXPECT_NEAR(rows[0].log2_max_orbit, 13.651724433108065, 1e-12);
  EXPECT_NEAR(rows[1].log2_max_orbit, 44.25014046988262, 1e-10);
  EXPECT_NEAR(rows[1].log2_fraction, -211.74985953011736, 1e-10);
  EXPECT_NEAR(rows[2].fraction, 16.0 / 65536, 1e-18);
  EXPECT_NEAR(std::exp2(rows[2].log2_query_bound), 2048.0, 1e-9);
  // The symmetric-bits census at n=16 has the middle layer as largest orbit.
  auto c = orbit_census_boolean(Representation::bits(16, symmetric_generators(16)), 1.0);
  EXPECT_EQ(c.num_orbits(), 17u);
  EXPECT_EQ(c.max_orbit(), 12870u);
  auto cyc = orbit_census_boolean(Representation::bits(16, cyclic_generators(16)), 1.0);
  EXPECT_EQ(cyc.max_orbit(), 16u);
}

TEST(Frames, ReynoldsReturnsGroup) {
  auto F = Frame::reynolds(cyclic_group(3));
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(3, 2);
  EXPECT_EQ(frame_eval(F, X).size(), 3u);
}

TEST(Frames, AbsLexSortSingletonAndTies) {
  Eigen::MatrixXd X(3, 1);
  X << 3, -1, 2;
  auto F = frame_eval(Frame::abs_lex_sort(), X);
  ASSERT_EQ(F.size(), 1u);
  auto canon = act_rows(F[0].inverse(), X);
  EXPECT_EQ(canon(0, 0), -1);
  EXPECT_EQ(canon(1, 0), 2);
  EXPECT_EQ(canon(2, 0), 3);

  Eigen::MatrixXd T(3, 2);
  T << 1, 2, 1, 2, 0, 5;
  EXPECT_EQ(frame_eval(Frame::abs_lex_sort(), T).size(), 2u);
  Eigen::MatrixXd Big = Eigen::MatrixXd::Ones(5, 1);
  EXPECT_EQ(frame_eval(Frame::abs_lex_sort(), Big).size(), 1u);
  Eigen::MatrixXd Three = Eigen::MatrixXd::Ones(3, 1);
  EXPECT_EQ(frame_eval(Frame::abs_lex_sort(), Three).size(), 6u);
}

TEST(Frames, SignInvariance) {
  EXPECT_EQ(check_sign_invariance(Frame::reynolds(cyclic_group(5)), 5, 2, 1000, 1).violations, 0);
  EXPECT_EQ(check_sign_invariance(Frame::abs_lex_sort(), 6, 2, 1000, 2).violations, 0);
  EXPECT_GT(check_sign_invariance(Frame::lex_sort(), 6, 2, 1000, 3).violations, 0);
}

TEST(Frames, Equivariance) {
  auto C5 = cyclic_group(5);
  EXPECT_EQ(check_equivariance(Frame::reynolds(C5), C5.elements(), 5, 2, 100, 4).violations, 0);
  auto S4 = enumerate_group(symmetric_generators(4));
  EXPECT_EQ(check_equivariance(Frame::abs_lex_sort(), S4.elements(), 4, 2, 100, 5).violations, 0);
  // Small-integer entries force ties; with at most 3 rows every tie class is
  // enumerated in full and equivariance is exact.
  auto S3 = enumerate_group(symmetric_generators(3));
  EXPECT_EQ(check_equivariance(Frame::abs_lex_sort(), S3.elements(), 3, 1, 200, 6, true).violations, 0);
}

TEST(Frames, LargeTieClassFallsBackToStableOrder) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(4, 1);
  auto F = frame_eval(Frame::abs_lex_sort(), X);
  ASSERT_EQ(F.size(), 1u);
  EXPECT_TRUE(F[0].is_identity());
}

TEST(Frames, ConstantFrameMustBeWholeGroup) {
  auto C4 = cyclic_group(4);
  EXPECT_NO_THROW(Frame::constant(C4, C4.elements()));
  EXPECT_THROW(Frame::constant(C4, {C4[0], C4[2]}), InvalidArgument);
  EXPECT_THROW(Frame::constant(C4, {C4[0]}), InvalidArgument);
}

TEST(PermutedInner, Statistics) {
  const double chi8_mean = 2.741624675377657;  // E||x|| for x ~ N(0, I_8)
  auto id = Permutation::identity(8);
  auto same = permuted_inner_stats(id, id, 20000, 1);
  EXPECT_NEAR(same.mean, chi8_mean, 4 * same.stderr_);
  auto cyc = permuted_inner_stats(id, Permutation::rotation(8, 1), 20000, 2);
  EXPECT_EQ(cyc.fixed, 0);
  EXPECT_NEAR(cyc.mean, 0.0, 4 * cyc.stderr_);
  auto four = permuted_inner_stats(id, Permutation::cycle(8, {0, 1, 2, 3}), 20000, 3);
  EXPECT_EQ(four.fixed, 4);
  EXPECT_NEAR(four.reference, 4 / std::sqrt(8.0), 1e-15);
  EXPECT_NEAR(four.mean, 4 * chi8_mean / 8, 4 * four.stderr_);
  EXPECT_GT(four.mean + 4 * four.stderr_, 4 / 3.0);
  EXPECT_LT(four.mean - 4 * four.stderr_, 4 / std::sqrt(8.0));
}

TEST(SubsetOrbits, CyclicPairs) {
  auto orbits = subset_orbits(cyclic_group(6), 2);
  ASSERT_EQ(orbits.size(), 3u);  // distances 1, 2, 3
  std::size_t total = 0;
  for (auto& o : orbits) total += o.size();
  EXPECT_EQ(total, 15u);
}

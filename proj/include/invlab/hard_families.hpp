#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "invlab/common.hpp"
#include "invlab/groups_frames.hpp"
#include "invlab/invariant_hermite.hpp"

namespace invlab {

// ---------------------------------------------------------------------------
// Degree-count parities on graphs.

// Entry i (0-based) counts nodes with out-degree i; length n+1.
inline std::vector<int> degree_profile(const Adjacency& A) {
  if (A.rows() != A.cols()) throw DimensionMismatch("adjacency must be square");
  int n = static_cast<int>(A.rows());
  std::vector<int> c(n + 1, 0);
  for (int v = 0; v < n; ++v) {
    int deg = 0;
    for (int u = 0; u < n; ++u) {
      if (A(v, u) != 0 && A(v, u) != 1) throw InvalidArgument("adjacency entries must be 0/1");
      deg += A(v, u);
    }
    ++c[deg];
  }
  return c;
}

// g_{S,b}(A) = b + sum_{i in S} c_A[i] mod 2, with S holding 1-based indices
// into the degree profile.
struct DegreeCountParity {
  int n = 0;
  std::vector<int> S;
  int b = 0;

  void validate() const {
    if (n < 1) throw InvalidArgument("n must be >= 1");
    if (b != 0 && b != 1) throw InvalidArgument("b must be a bit");
    for (int i : S)
      if (i < 1 || i > n + 1) throw InvalidArgument("S index outside 1..n+1");
  }
};

inline int eval_gSb_profile(const DegreeCountParity& f, const std::vector<int>& c) {
  int s = f.b;
  for (int i : f.S) s += c[i - 1];
  return s & 1;
}

inline int eval_gSb(const DegreeCountParity& f, const Adjacency& A) {
  if (A.rows() != f.n) throw DimensionMismatch("adjacency size differs from n");
  return eval_gSb_profile(f, degree_profile(A));
}

// Uniform subset of [n+1] of the given size and uniform b.
inline DegreeCountParity random_degree_count_parity(Random& rng, int n, int size) {
  if (size < 0 || size > n + 1) throw InvalidArgument("subset size outside 0..n+1");
  std::vector<int> idx(n + 1);
  std::iota(idx.begin(), idx.end(), 1);
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  DegreeCountParity f;
  f.n = n;
  f.S.assign(idx.begin(), idx.begin() + size);
  std::sort(f.S.begin(), f.S.end());
  f.b = rng.bit() ? 1 : 0;
  return f;
}

// Two-layer message-passing network:
//   h_i = sum_v relu(a_i + b_i (A 1)_v),        i = 1..k1
//   out = sum_i u_i relu(<W_{:,i}, h> + v_i),   i = 1..k2
struct DegreeParityGnn {
  Eigen::VectorXd a, b;  // first layer, length k1
  Eigen::MatrixXd W;     // k1 x k2, column i feeds hidden unit i
  Eigen::VectorXd u, v;  // second layer, length k2
  Eigen::MatrixXd M;     // h = M c for the degree profile c

  Eigen::VectorXd first_layer(const Adjacency& A) const {
    int n = static_cast<int>(A.rows());
    Eigen::VectorXd h = Eigen::VectorXd::Zero(a.size());
    for (int v = 0; v < n; ++v) {
      double deg = A.row(v).cast<double>().sum();
      for (int i = 0; i < a.size(); ++i) h[i] += std::max(0.0, a[i] + b[i] * deg);
    }
    return h;
  }

  double eval(const Adjacency& A) const {
    if (A.rows() != A.cols() || A.rows() + 1 != a.size()) throw DimensionMismatch("adjacency size differs from n");
    Eigen::VectorXd h = first_layer(A);
    double out = 0.0;
    for (int i = 0; i < u.size(); ++i) out += u[i] * std::max(0.0, W.col(i).dot(h) + v[i]);
    return out;
  }
};

inline DegreeParityGnn realize_gSb_as_gnn(const DegreeCountParity& f) {
  f.validate();
  int k = f.n + 1;
  DegreeParityGnn net;
  net.a.resize(k);
  net.b = Eigen::VectorXd::Ones(k);
  for (int i = 1; i <= k; ++i) net.a[i - 1] = 2 - i;

  // Channel i on a node of degree j-1 gives relu(j - i + 1).
  std::vector<std::vector<long long>> M(k, std::vector<long long>(k, 0));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) M[i][j] = std::max(0, j - i + 1);
  net.M.resize(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) net.M(i, j) = static_cast<double>(M[i][j]);

  // w = M^{-T} 1_S by forward substitution on the unit lower-triangular M^T,
  // carried in integers so the network is exact.
  std::vector<long long> rhs(k, 0), w(k, 0);
  for (int i : f.S) rhs[i - 1] = 1;
  for (int i = 0; i < k; ++i) {
    if (M[i][i] != 1) throw SingularM("degree-profile matrix lost its unit diagonal");
    long long acc = rhs[i];
    for (int j = 0; j < i; ++j) acc -= M[j][i] * w[j];
    w[i] = acc;
  }
  for (int j = 0; j < k; ++j) {
    long long check = 0;
    for (int i = 0; i < k; ++i) check += M[i][j] * w[i];
    if (check != rhs[j]) throw SingularM("M^T w != 1_S");
  }

  net.W.resize(k, k);
  for (int c = 0; c < k; ++c)
    for (int i = 0; i < k; ++i) net.W(i, c) = static_cast<double>(w[i]);
  net.u.resize(k);
  net.v.resize(k);
  for (int i = 1; i <= k; ++i) {
    net.u[i - 1] = i == 1 ? 1.0 : 2.0 * ((i - 1) % 2 == 0 ? 1.0 : -1.0);
    net.v[i - 1] = f.b - i + 1;
  }
  return net;
}

// ---------------------------------------------------------------------------
// Ridge construction.

enum class Activation { ReLU, Identity, Sigmoid };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Identity: return "identity";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "identity") return Activation::Identity;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw InvalidArgument("unknown activation '" + s + "'");
}

inline double activate(Activation a, double t) {
  switch (a) {
    case Activation::ReLU: return t > 0.0 ? t : 0.0;
    case Activation::Identity: return t;
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-t));
  }
  return t;
}

struct RidgeParams {
  Eigen::MatrixXd W;  // 2 x 2k
  Eigen::VectorXd a;  // 2k
};

// Columns j = 1..2k are (cos(pi j/k), sin(pi j/k)); a_j = (-1)^j.
inline RidgeParams make_ridge_params(int k) {
  if (k < 1) throw InvalidArgument("k must be >= 1");
  RidgeParams p;
  p.W.resize(2, 2 * k);
  p.a.resize(2 * k);
  const double pi = std::acos(-1.0);
  for (int j = 1; j <= 2 * k; ++j) {
    p.W(0, j - 1) = std::cos(pi * j / k);
    p.W(1, j - 1) = std::sin(pi * j / k);
    p.a[j - 1] = (j % 2 == 0) ? 1.0 : -1.0;
  }
  return p;
}

namespace detail {

// 1^T sigma(Z W) a for Z with two columns.
inline double ridge_readout(const Eigen::MatrixXd& Z, const RidgeParams& p, Activation act) {
  Eigen::MatrixXd H = Z * p.W;
  double s = 0.0;
  for (int j = 0; j < H.cols(); ++j) {
    double col = 0.0;
    for (int v = 0; v < H.rows(); ++v) col += activate(act, H(v, j));
    s += p.a[j] * col;
  }
  return s;
}

inline double op_norm_2x2(const Eigen::Matrix2d& M) {
  double f = M.squaredNorm(), det = M.determinant();
  double disc = std::max(f * f - 4.0 * det * det, 0.0);
  return std::sqrt(std::max((f + std::sqrt(disc)) / 2.0, 0.0));
}

}  // namespace detail

// f(X) = 1^T sigma(A X B W*) a*, with A any n x n operator.
inline double eval_ridge(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, int k, const Eigen::MatrixXd& X,
                         Activation act = Activation::ReLU) {
  if (A.rows() != A.cols() || A.cols() != X.rows()) throw DimensionMismatch("shift and X disagree on node count");
  if (B.cols() != 2 || B.rows() != X.cols()) throw DimensionMismatch("B must be d x 2 with d = cols(X)");
  return detail::ridge_readout(A * (X * B), make_ridge_params(k), act);
}

inline double eval_ridge(const GraphShift& s, const Eigen::MatrixXd& B, int k, const Eigen::MatrixXd& X,
                         Activation act = Activation::ReLU) {
  return eval_ridge(s.matrix, B, k, X, act);
}

inline bool has_orthonormal_columns(const Eigen::MatrixXd& B, double tol = 1e-10) {
  return B.cols() == 2 && (B.transpose() * B - Eigen::Matrix2d::Identity()).norm() < tol;
}

// MC norm of X -> f(XB) under standard normal X. XB is itself standard
// normal for orthonormal B, so the draw is an n x 2 Gaussian.
inline McEstimate ridge_norm(const Eigen::MatrixXd& A, int k, Activation act, long samples = 100000,
                             std::uint64_t seed = 0) {
  RidgeParams p = make_ridge_params(k);
  int n = static_cast<int>(A.rows());
  auto g = detail::mc_product_moments(samples, seed, 1, [&](Random& rng, double* out) {
    out[0] = detail::ridge_readout(A * detail::gaussian_matrix(rng, n, 2), p, act);
  });
  double m2 = g.estimate(0, 0);
  double norm = std::sqrt(std::max(m2, 0.0));
  return {norm, norm > 0.0 ? g.stderr_(0, 0) / (2.0 * norm) : g.stderr_(0, 0)};
}

// g_B(X) = f(XB)/||f||.
struct RidgeFamilyMember {
  int k = 1;
  Eigen::MatrixXd B;      // d x 2
  Eigen::MatrixXd shift;  // n x n
  Activation activation = Activation::ReLU;
  double norm = 0.0;

  double raw(const Eigen::MatrixXd& X) const { return eval_ridge(shift, B, k, X, activation); }
  double operator()(const Eigen::MatrixXd& X) const {
    double r = raw(X);
    return norm > 0.0 ? r / norm : r;
  }
};

inline RidgeFamilyMember make_ridge_member(const Eigen::MatrixXd& shift, const Eigen::MatrixXd& B, int k,
                                           Activation act, double norm) {
  if (!has_orthonormal_columns(B)) throw InvalidArgument("B must have two orthonormal columns");
  return {k, B, shift, act, norm};
}

// ---------------------------------------------------------------------------
// Near-orthogonal 2-frames.

struct BSet {
  std::vector<Eigen::MatrixXd> matrices;
  double threshold = 0.0;
  std::size_t attempts = 0;

  std::size_t size() const { return matrices.size(); }
};

// Orthonormal n x 2 frame from the QR of a Gaussian matrix, with the sign of
// R's diagonal fixed positive.
inline Eigen::MatrixXd random_two_frame(Random& rng, int n) {
  Eigen::MatrixXd G = detail::gaussian_matrix(rng, n, 2);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, 2);
  Eigen::MatrixXd R = qr.matrixQR().topRows(2).triangularView<Eigen::Upper>();
  for (int j = 0; j < 2; ++j)
    if (R(j, j) < 0.0) Q.col(j) *= -1.0;
  return Q;
}

// Largest ||(hB_i)^T B_j|| over pairs i != j and h in the group (identity
// only when no group is given).
inline double bset_max_overlap(const std::vector<Eigen::MatrixXd>& Bs, const PermGroup* group = nullptr) {
  double worst = 0.0;
  for (std::size_t i = 0; i < Bs.size(); ++i)
    for (std::size_t j = 0; j < Bs.size(); ++j) {
      if (i == j) continue;
      if (!group) {
        if (j > i) worst = std::max(worst, detail::op_norm_2x2(Bs[i].transpose() * Bs[j]));
        continue;
      }
      for (const auto& h : group->elements())
        worst = std::max(worst, detail::op_norm_2x2(act_rows(h, Bs[i]).transpose() * Bs[j]));
    }
  return worst;
}

inline bool verify_bset(const BSet& S, const PermGroup* group = nullptr) {
  for (const auto& B : S.matrices)
    if (!has_orthonormal_columns(B)) return false;
  return bset_max_overlap(S.matrices, group) <= S.threshold;
}

// Greedy rejection sampling with a budget of 100 x count draws.
inline BSet sample_near_orthogonal_set(int n, int count, double threshold, const PermGroup* group,
                                       std::uint64_t seed) {
  if (n < 2) throw InvalidArgument("n must be >= 2 for two orthonormal columns");
  if (count < 1) throw InvalidArgument("count must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("threshold must lie in (0,1)");
  if (group && group->n() != n) throw DimensionMismatch("group acts on a different n");
  Random rng(seed);
  BSet S;
  S.threshold = threshold;
  std::size_t budget = 100 * static_cast<std::size_t>(count);
  std::vector<Eigen::MatrixXd> orbit;  // h B for accepted B, all h
  while (S.matrices.size() < static_cast<std::size_t>(count) && S.attempts < budget) {
    ++S.attempts;
    Eigen::MatrixXd B = random_two_frame(rng, n);
    bool ok = true;
    if (group) {
      for (const auto& hB : orbit)
        if (detail::op_norm_2x2(hB.transpose() * B) > threshold) { ok = false; break; }
    } else {
      for (const auto& C : S.matrices)
        if (detail::op_norm_2x2(C.transpose() * B) > threshold) { ok = false; break; }
    }
    if (!ok) continue;
    S.matrices.push_back(B);
    if (group)
      for (const auto& h : group->elements()) orbit.push_back(act_rows(h, B));
  }
  if (count >= 2 && S.matrices.size() < 2)
    throw Infeasible("fewer than 2 near-orthogonal frames found within the retry budget");
  if (!verify_bset(S, group)) throw Infeasible("post-construction verification failed");
  return S;
}

// ---------------------------------------------------------------------------
// Frame-averaged ridge over a permutation group acting on rows.

// f*(Y) = a*^T sigma(W*^T Y) 1_d for Y in R^{2 x d}.
inline double eval_ridge_star(const Eigen::MatrixXd& Y, int k, Activation act = Activation::ReLU) {
  if (Y.rows() != 2) throw DimensionMismatch("f* takes a 2 x d input");
  return detail::ridge_readout(Y.transpose(), make_ridge_params(k), act);
}

inline McEstimate ridge_star_norm(int k, int d, Activation act, long samples = 100000, std::uint64_t seed = 0) {
  RidgeParams p = make_ridge_params(k);
  auto g = detail::mc_product_moments(samples, seed, 1, [&](Random& rng, double* out) {
    out[0] = detail::ridge_readout(detail::gaussian_matrix(rng, d, 2), p, act);
  });
  double norm = std::sqrt(std::max(g.estimate(0, 0), 0.0));
  return {norm, norm > 0.0 ? g.stderr_(0, 0) / (2.0 * norm) : g.stderr_(0, 0)};
}

// g_B(X) = sum_{g in G} f*(B^T g^{-1} X) / (sqrt|G| ||f*||). Since
// B^T g^{-1} X = (gB)^T X, the orbit frames are stacked once.
class FrameAveragedRidge {
 public:
  FrameAveragedRidge(int k, Eigen::MatrixXd B, PermGroup group, Activation act, double star_norm)
      : k_(k), B_(std::move(B)), group_(std::move(group)), act_(act), norm_(star_norm), p_(make_ridge_params(k)) {
    if (!has_orthonormal_columns(B_)) throw InvalidArgument("B must have two orthonormal columns");
    if (B_.rows() != group_.n()) throw DimensionMismatch("B rows differ from group degree");
    const auto& els = group_.elements();
    stacked_.resize(B_.rows(), 2 * static_cast<Eigen::Index>(els.size()));
    for (std::size_t i = 0; i < els.size(); ++i) stacked_.middleCols(2 * i, 2) = act_rows(els[i], B_);
  }

  int k() const { return k_; }
  const Eigen::MatrixXd& B() const { return B_; }
  const PermGroup& group() const { return group_; }
  Activation activation() const { return act_; }
  double star_norm() const { return norm_; }

  // Unnormalized group sum.
  double sum(const Eigen::MatrixXd& X) const {
    if (X.rows() != B_.rows()) throw DimensionMismatch("X rows differ from group degree");
    Eigen::MatrixXd Y = stacked_.transpose() * X;  // 2|G| x d
    double s = 0.0;
    for (Eigen::Index g = 0; g < Y.rows() / 2; ++g)
      s += detail::ridge_readout(Y.middleRows(2 * g, 2).transpose(), p_, act_);
    return s;
  }

  double operator()(const Eigen::MatrixXd& X) const {
    double scale = std::sqrt(static_cast<double>(group_.order())) * (norm_ > 0.0 ? norm_ : 1.0);
    return sum(X) / scale;
  }

 private:
  int k_;
  Eigen::MatrixXd B_;
  PermGroup group_;
  Activation act_;
  double norm_;
  RidgeParams p_;
  Eigen::MatrixXd stacked_;
};

inline double eval_frame_averaged_ridge(const FrameAveragedRidge& member, const Eigen::MatrixXd& X) {
  return member(X);
}

// ---------------------------------------------------------------------------
// Parity families f_S and their frame averages.

inline constexpr int kMaxGoelWidth = 20;

struct GoelParityMember {
  int n = 0, d = 0, m = 0;
  std::vector<int> S;  // 0-based rows, sorted
  Frame frame;
  Activation activation = Activation::ReLU;
};

inline GoelParityMember make_goel_member(int n, int d, std::vector<int> S, Frame frame,
                                         Activation act = Activation::ReLU) {
  int m = static_cast<int>(S.size());
  if (m > kMaxGoelWidth) throw TooWide("m > 20 makes the 2^m enumeration intractable");
  if (n < 1 || d < 1) throw InvalidArgument("n and d must be positive");
  if (m < 1 || m > static_cast<int>(std::floor(std::log2(static_cast<double>(n)) + 1e-12)))
    throw InvalidArgument("need 1 <= m <= floor(log2 n)");
  std::sort(S.begin(), S.end());
  if (std::adjacent_find(S.begin(), S.end()) != S.end()) throw InvalidArgument("S has repeated rows");
  for (int i : S)
    if (i < 0 || i >= n) throw InvalidArgument("S row outside 0..n-1");
  return {n, d, m, std::move(S), std::move(frame), act};
}

// f_S(X) = sum_j sum_{w in {-1,1}^m} chi(w) sigma(<w, X_S[:, j]> / sqrt(m)).
inline double eval_goel_plain(const std::vector<int>& S, const Eigen::MatrixXd& X, Activation act) {
  int m = static_cast<int>(S.size());
  if (m > kMaxGoelWidth) throw TooWide("m > 20 makes the 2^m enumeration intractable");
  double scale = 1.0 / std::sqrt(static_cast<double>(m));
  std::uint32_t total = 1u << m;
  double out = 0.0;
  std::vector<double> x(m);
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    for (int i = 0; i < m; ++i) x[i] = X(S[i], j) * scale;
    // Gray-code walk over sign vectors; w starts at all +1.
    double t = std::accumulate(x.begin(), x.end(), 0.0);
    std::uint32_t w = 0;  // bit i set means w_i = -1
    double chi = 1.0, acc = activate(act, t);
    for (std::uint32_t step = 1; step < total; ++step) {
      int flip = __builtin_ctz(step);
      w ^= 1u << flip;
      t += (w >> flip & 1u) ? -2.0 * x[flip] : 2.0 * x[flip];
      chi = -chi;
      acc += chi * activate(act, t);
    }
    out += acc;
  }
  return out;
}

// Plain f_S, or (1/sqrt|F(X)|) sum_{g in F(X)} f_S(g^{-1} X) when averaged.
inline double eval_goel(const GoelParityMember& f, const Eigen::MatrixXd& X, bool averaged) {
  if (f.m > kMaxGoelWidth) throw TooWide("m > 20 makes the 2^m enumeration intractable");
  if (X.rows() != f.n || X.cols() != f.d) throw DimensionMismatch("X must be n x d");
  if (!averaged) return eval_goel_plain(f.S, X, f.activation);
  auto frame = frame_eval(f.frame, X);
  double s = 0.0;
  // (g^{-1} X)[r] = X[g(r)], so rows S of g^{-1} X are rows g(S) of X.
  std::vector<int> gS(f.S.size());
  for (const auto& g : frame) {
    for (std::size_t i = 0; i < f.S.size(); ++i) gS[i] = g(f.S[i]);
    s += eval_goel_plain(gS, X, f.activation);
  }
  return s / std::sqrt(static_cast<double>(frame.size()));
}

// ---------------------------------------------------------------------------
// Correlation, SDA and norm census.

using MatrixSampler = std::function<Eigen::MatrixXd(Random&)>;

inline MatrixSampler gaussian_sampler(int rows, int cols) {
  return [rows, cols](Random& rng) { return detail::gaussian_matrix(rng, rows, cols); };
}

struct CorrelationResult {
  Eigen::MatrixXd gram;
  Eigen::MatrixXd stderr_;
  long samples = 0;
  double rho_avg = 0.0;
  // worst_avg[s-1]: greedy estimate of the largest average |correlation|
  // over subsets of size s.
  std::vector<double> worst_avg;

  double max_off_diagonal() const {
    double w = 0.0;
    for (Eigen::Index i = 0; i < gram.rows(); ++i)
      for (Eigen::Index j = 0; j < gram.cols(); ++j)
        if (i != j) w = std::max(w, std::abs(gram(i, j)));
    return w;
  }

  // Largest m such that every subset of relative size >= 1/m has average
  // correlation <= tau, read off the greedy profile. 0 when even the full
  // family exceeds tau.
  int sda_estimate(double tau) const {
    int N = static_cast<int>(worst_avg.size());
    int smin = N + 1;
    for (int s = N; s >= 1; --s) {
      if (worst_avg[s - 1] > tau) break;
      smin = s;
    }
    if (smin > N) return 0;
    return N / smin;
  }
};

namespace detail {

inline double subset_avg(const Eigen::MatrixXd& absG, const std::vector<int>& idx) {
  double s = 0.0;
  for (int i : idx)
    for (int j : idx) s += absG(i, j);
  return s / (static_cast<double>(idx.size()) * idx.size());
}

// Greedy peel: repeatedly drop the member with the smallest within-subset
// row sum, recording the average at each size.
inline std::vector<double> greedy_worst_averages(const Eigen::MatrixXd& G) {
  int N = static_cast<int>(G.rows());
  Eigen::MatrixXd absG = G.cwiseAbs();
  std::vector<int> live(N);
  std::iota(live.begin(), live.end(), 0);
  std::vector<double> out(N);
  while (!live.empty()) {
    out[live.size() - 1] = subset_avg(absG, live);
    std::size_t drop = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < live.size(); ++a) {
      double r = 0.0;
      for (int j : live) r += absG(live[a], j);
      if (r < best) best = r, drop = a;
    }
    live.erase(live.begin() + static_cast<std::ptrdiff_t>(drop));
  }
  return out;
}

}  // namespace detail

inline CorrelationResult correlation_matrix(const std::vector<MatrixFn>& family, const MatrixSampler& sampler,
                                            long samples, std::uint64_t seed) {
  if (family.size() < 2) throw InvalidArgument("correlation needs at least 2 functions");
  int m = static_cast<int>(family.size());
  auto g = detail::mc_product_moments(samples, seed, m, [&](Random& rng, double* out) {
    Eigen::MatrixXd X = sampler(rng);
    for (int i = 0; i < m; ++i) out[i] = family[i](X);
  });
  CorrelationResult r;
  r.gram = g.estimate;
  r.stderr_ = g.stderr_;
  r.samples = samples;
  r.rho_avg = r.gram.cwiseAbs().sum() / (static_cast<double>(m) * m);
  r.worst_avg = detail::greedy_worst_averages(r.gram);
  return r;
}

struct NormCensus {
  double fraction = 0.0;
  std::vector<double> norm_sq;
  std::vector<double> stderr_;
};

inline NormCensus norm_census(const std::vector<MatrixFn>& family, const MatrixSampler& sampler, double floor,
                              long samples, std::uint64_t seed) {
  if (samples < 10000) throw InvalidArgument("norm census needs at least 1e4 samples");
  if (family.empty()) throw InvalidArgument("empty family");
  int m = static_cast<int>(family.size());
  int chunks = static_cast<int>(std::min<long>(detail::kMcChunks, samples));
  std::vector<Eigen::VectorXd> s1(chunks), s2(chunks);
  parallel_chunks(chunks, [&](int c) {
    long lo = samples * c / chunks, hi = samples * (c + 1) / chunks;
    Random rng(seed, static_cast<std::uint64_t>(c) + 1);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(m), b = Eigen::VectorXd::Zero(m);
    for (long t = lo; t < hi; ++t) {
      Eigen::MatrixXd X = sampler(rng);
      for (int i = 0; i < m; ++i) {
        double v = family[i](X), p = v * v;
        a[i] += p;
        b[i] += p * p;
      }
    }
    s1[c] = a;
    s2[c] = b;
  });
  Eigen::VectorXd a = Eigen::VectorXd::Zero(m), b = Eigen::VectorXd::Zero(m);
  for (int c = 0; c < chunks; ++c) a += s1[c], b += s2[c];
  NormCensus out;
  double N = static_cast<double>(samples);
  int kept = 0;
  for (int i = 0; i < m; ++i) {
    double mean = a[i] / N;
    double var = std::max((b[i] - N * mean * mean) / (N - 1), 0.0);
    out.norm_sq.push_back(mean);
    out.stderr_.push_back(std::sqrt(var / N));
    if (mean >= floor) ++kept;
  }
  out.fraction = static_cast<double>(kept) / m;
  return out;
}

// ---------------------------------------------------------------------------
// Collision of boolean degree profiles.

inline std::vector<int> parity_profile(const Adjacency& A) {
  auto c = degree_profile(A);
  for (int& x : c) x &= 1;
  return c;
}

inline Adjacency random_adjacency(Random& rng, int n) {
  Adjacency A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = rng.bit() ? 1 : 0;
  return A;
}

// Exact P[c_A mod 2 == c_A' mod 2] over independent uniform A, A' in
// {0,1}^{n x n}, by enumerating all 2^{n^2} matrices.
inline double exact_profile_collision_rate(int n) {
  if (n < 1 || n > 4) throw TooLarge("exact collision enumeration limited to n <= 4");
  std::map<std::vector<int>, std::uint64_t> counts;
  std::uint32_t total = 1u << (n * n);
  Adjacency A(n, n);
  for (std::uint32_t x = 0; x < total; ++x) {
    for (int b = 0; b < n * n; ++b) A(b / n, b % n) = (x >> b) & 1u;
    ++counts[parity_profile(A)];
  }
  long double s = 0.0L;
  for (const auto& [k, c] : counts) s += static_cast<long double>(c) * c;
  return static_cast<double>(s / (static_cast<long double>(total) * total));
}

// Joint distribution of (g(A), g(A')) over all 2^{n+2} pairs (S, b); indexed
// by 2 g(A) + g(A').
inline std::array<double, 4> joint_output_distribution(const std::vector<int>& c1, const std::vector<int>& c2) {
  int len = static_cast<int>(c1.size());
  if (c2.size() != c1.size()) throw DimensionMismatch("profiles differ in length");
  if (len > 21) throw TooLarge("enumeration limited to n <= 20");
  std::array<std::uint64_t, 4> cnt{};
  std::uint64_t total = 1ULL << (len + 1);
  for (std::uint64_t code = 0; code < total; ++code) {
    int b = static_cast<int>(code & 1ULL);
    std::uint64_t S = code >> 1;
    int y1 = b, y2 = b;
    for (int i = 0; i < len; ++i)
      if (S >> i & 1ULL) y1 ^= c1[i] & 1, y2 ^= c2[i] & 1;
    ++cnt[2 * y1 + y2];
  }
  std::array<double, 4> p{};
  for (int i = 0; i < 4; ++i) p[i] = static_cast<double>(cnt[i]) / static_cast<double>(total);
  return p;
}

struct CollisionReport {
  int n = 0;
  long pairs = 0;
  long collisions = 0;
  double collision_rate = 0.0;
  std::vector<std::array<double, 4>> conditional;  // up to 10 non-colliding pairs
  bool all_uniform = true;
};

inline CollisionReport parity_profile_collision(int n, long pairs, std::uint64_t seed) {
  if (n < 1 || n > 20) throw InvalidArgument("n must lie in 1..20");
  if (pairs < 100) throw InvalidArgument("need at least 100 pairs");
  Random rng(seed);
  CollisionReport r;
  r.n = n;
  r.pairs = pairs;
  for (long t = 0; t < pairs; ++t) {
    auto c1 = parity_profile(random_adjacency(rng, n));
    auto c2 = parity_profile(random_adjacency(rng, n));
    if (c1 == c2) {
      ++r.collisions;
    } else if (r.conditional.size() < 10) {
      auto p = joint_output_distribution(c1, c2);
      for (double q : p)
        if (q != 0.25) r.all_uniform = false;
      r.conditional.push_back(p);
    }
  }
  r.collision_rate = static_cast<double>(r.collisions) / static_cast<double>(pairs);
  return r;
}

// ---------------------------------------------------------------------------
// Labeled dataset export: flattened input row, then the label.

inline void write_labeled_csv(std::ostream& os, const std::vector<std::vector<double>>& inputs,
                              const std::vector<double>& labels) {
  if (inputs.size() != labels.size()) throw DimensionMismatch("inputs and labels differ in count");
  std::size_t width = inputs.empty() ? 0 : inputs[0].size();
  for (std::size_t j = 0; j < width; ++j) os << 'x' << j << ',';
  os << "label\n";
  os.precision(17);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].size() != width) throw DimensionMismatch("ragged inputs");
    for (double v : inputs[i]) os << v << ',';
    os << labels[i] << '\n';
  }
}

}  // namespace invlab

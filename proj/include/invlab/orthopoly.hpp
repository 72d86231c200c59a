#pragma once

#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "invlab/common.hpp"

namespace invlab {

inline constexpr int kMaxPolyDegree = 16;

// Degree tuple over coordinates. Ordered graded-lexicographically: by total
// degree, then with larger leading exponents first (x1 > x2 > ...).
struct MultiIndex {
  std::vector<int> degrees;

  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> d) : degrees(std::move(d)) {}
  MultiIndex(std::initializer_list<int> d) : degrees(d) {}

  int total() const { return std::accumulate(degrees.begin(), degrees.end(), 0); }
  int dim() const { return static_cast<int>(degrees.size()); }
  int operator[](int i) const { return degrees[i]; }

  friend bool operator==(const MultiIndex& a, const MultiIndex& b) { return a.degrees == b.degrees; }
  friend bool operator<(const MultiIndex& a, const MultiIndex& b) {
    int ta = a.total(), tb = b.total();
    if (ta != tb) return ta < tb;
    return a.degrees > b.degrees;
  }

  std::string str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < degrees.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(degrees[i]);
    }
    return s + ")";
  }
};

// All multi-indices in `dim` coordinates with min_total <= |S| <= max_total,
// in graded-lex order.
inline std::vector<MultiIndex> enumerate_multi_indices(int dim, int max_total, int min_total = 0) {
  std::vector<MultiIndex> out;
  std::vector<int> cur(dim, 0);
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == dim - 1) {
      for (int v = 0; v <= left; ++v) {
        cur[pos] = v;
        MultiIndex m(cur);
        int t = m.total();
        if (t >= min_total) out.push_back(std::move(m));
      }
      return;
    }
    for (int v = 0; v <= left; ++v) {
      cur[pos] = v;
      self(self, pos + 1, left - v);
    }
  };
  if (dim == 0) {
    if (min_total <= 0) out.emplace_back();
    return out;
  }
  rec(rec, 0, max_total);
  std::sort(out.begin(), out.end());
  return out;
}

enum class Marginal { StandardNormal, Uniform, ShiftedUniform, Custom };

inline const char* marginal_name(Marginal m) {
  switch (m) {
    case Marginal::StandardNormal: return "standard_normal";
    case Marginal::Uniform: return "uniform_m1_1";
    case Marginal::ShiftedUniform: return "uniform_0_1";
    case Marginal::Custom: return "custom_moments";
  }
  return "?";
}

inline Marginal parse_marginal(const std::string& s) {
  if (s == "standard_normal") return Marginal::StandardNormal;
  if (s == "uniform_m1_1") return Marginal::Uniform;
  if (s == "uniform_0_1") return Marginal::ShiftedUniform;
  if (s == "custom_moments") return Marginal::Custom;
  throw ParseError("unknown marginal '" + s + "'");
}

// Orthonormal polynomials H_0..H_D stored as monomial coefficient rows:
// H_t(x) = sum_k coeffs[t][k] x^k with coeffs[t][t] > 0. Evaluation runs the
// three-term recurrence x H_t = b_{t+1} H_{t+1} + a_t H_t + b_t H_{t-1},
// which avoids the cancellation of monomial sums at high degree.
struct OrthoFamily {
  int max_degree = 0;
  std::vector<std::vector<double>> coeffs;
  Marginal marginal = Marginal::Custom;
  // Raw moments of the weight; filled for custom marginals.
  std::vector<double> moments;
  std::vector<double> rec_a;  // a_0..a_{D-1}
  std::vector<double> rec_b;  // b_0 (unused) .. b_D

  double eval(int t, double x) const {
    if (t < 0 || t > max_degree) throw DegreeOverflow("degree outside family table");
    double prev = 0.0, cur = 1.0;
    for (int s = 0; s < t; ++s) {
      double next = ((x - rec_a[s]) * cur - rec_b[s] * prev) / rec_b[s + 1];
      prev = cur;
      cur = next;
    }
    return cur;
  }

  // H_0(x)..H_D(x).
  std::vector<double> eval_all(double x) const {
    std::vector<double> v(max_degree + 1);
    eval_into(x, v.data());
    return v;
  }

  void eval_into(double x, double* out) const {
    out[0] = 1.0;
    double prev = 0.0;
    for (int s = 0; s < max_degree; ++s) {
      out[s + 1] = ((x - rec_a[s]) * out[s] - rec_b[s] * prev) / rec_b[s + 1];
      prev = out[s];
    }
  }

  // Monomial evaluation, kept as an independent cross-check.
  double eval_monomial(int t, double x) const {
    const auto& c = coeffs.at(t);
    long double acc = 0.0L;
    for (int k = t; k >= 0; --k) acc = acc * x + c[k];
    return static_cast<double>(acc);
  }

  double leading(int t) const { return coeffs.at(t).at(t); }
};

// Recurrence coefficients read off the coefficient table by matching the
// x^{t+1} and x^t terms of x H_t.
template <class T>
inline void recurrence_from_table(OrthoFamily& f, const std::vector<std::vector<T>>& c) {
  int D = f.max_degree;
  f.rec_a.assign(std::max(D, 0), 0.0);
  f.rec_b.assign(D + 1, 0.0);
  for (int t = 1; t <= D; ++t) f.rec_b[t] = static_cast<double>(c[t - 1][t - 1] / c[t][t]);
  for (int t = 0; t < D; ++t) {
    T b = c[t][t] / c[t + 1][t + 1];
    T lower = t >= 1 ? c[t][t - 1] : T(0);
    f.rec_a[t] = static_cast<double>((lower - b * c[t + 1][t]) / c[t][t]);
  }
}

namespace detail {

inline void check_degree(int d) {
  if (d < 0) throw InvalidArgument("negative degree");
  if (d > kMaxPolyDegree) throw DegreeOverflow("degree " + std::to_string(d) + " above cap 16");
}

// Gauss rule from the Jacobi matrix (Golub-Welsch). alpha: diagonal (n),
// beta: off-diagonal (n-1), mu0: total mass. Nodes get two Newton steps on
// the monic recurrence and weights come from the Christoffel sum
// mu0 / sum_k p_k(x)^2, which keeps tiny tail weights relatively accurate.
inline std::pair<std::vector<double>, std::vector<double>> golub_welsch(
    const std::vector<double>& alpha, const std::vector<double>& beta, double mu0) {
  int n = static_cast<int>(alpha.size());
  Eigen::VectorXd diag(n), sub(std::max(n - 1, 0));
  for (int i = 0; i < n; ++i) diag[i] = alpha[i];
  for (int i = 0; i + 1 < n; ++i) sub[i] = beta[i];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    long double xi = es.eigenvalues()[i];
    for (int it = 0; it < 2; ++it) {
      long double pm = 0.0L, p = 1.0L, dpm = 0.0L, dp = 0.0L;
      for (int k = 0; k < n; ++k) {
        long double b2 = k > 0 ? static_cast<long double>(beta[k - 1]) * beta[k - 1] : 0.0L;
        long double pn = (xi - alpha[k]) * p - b2 * pm;
        long double dpn = p + (xi - alpha[k]) * dp - b2 * dpm;
        pm = p, p = pn, dpm = dp, dp = dpn;
      }
      if (dp != 0.0L) xi -= p / dp;
    }
    long double pm = 0.0L, p = 1.0L, sum = 1.0L;
    for (int k = 0; k + 1 < n; ++k) {
      long double bk = k > 0 ? static_cast<long double>(beta[k - 1]) : 0.0L;
      long double pn = ((xi - alpha[k]) * p - bk * pm) / beta[k];
      pm = p, p = pn;
      sum += p * p;
    }
    x[i] = static_cast<double>(xi);
    w[i] = static_cast<double>(mu0 / sum);
  }
  return {x, w};
}

}  // namespace detail

// Normalized probabilists' Hermite polynomials He_t / sqrt(t!).
inline OrthoFamily hermite_family(int max_degree) {
  detail::check_degree(max_degree);
  std::vector<std::vector<long double>> he(max_degree + 1);
  he[0] = {1.0L};
  if (max_degree >= 1) he[1] = {0.0L, 1.0L};
  for (int n = 1; n < max_degree; ++n) {
    std::vector<long double> next(n + 2, 0.0L);
    for (int k = 0; k <= n; ++k) next[k + 1] += he[n][k];
    for (int k = 0; k <= n - 1; ++k) next[k] -= n * he[n - 1][k];
    he[n + 1] = std::move(next);
  }
  OrthoFamily f;
  f.max_degree = max_degree;
  f.marginal = Marginal::StandardNormal;
  long double fact = 1.0L;
  for (int t = 0; t <= max_degree; ++t) {
    if (t > 0) fact *= t;
    long double s = std::sqrt(fact);
    std::vector<double> row(t + 1);
    for (int k = 0; k <= t; ++k) row[k] = static_cast<double>(he[t][k] / s);
    f.coeffs.push_back(std::move(row));
  }
  f.rec_a.assign(max_degree, 0.0);
  f.rec_b.assign(max_degree + 1, 0.0);
  for (int t = 1; t <= max_degree; ++t) f.rec_b[t] = std::sqrt(static_cast<double>(t));
  return f;
}

// Orthonormal Legendre polynomials under uniform[-1,1], or under uniform[0,1]
// when shifted.
inline OrthoFamily legendre_family(int max_degree, bool shifted) {
  detail::check_degree(max_degree);
  OrthoFamily f;
  f.max_degree = max_degree;
  f.marginal = shifted ? Marginal::ShiftedUniform : Marginal::Uniform;
  f.rec_a.assign(max_degree, shifted ? 0.5 : 0.0);
  f.rec_b.assign(max_degree + 1, 0.0);
  for (int t = 1; t <= max_degree; ++t)
    f.rec_b[t] = (shifted ? 0.5 : 1.0) * t / std::sqrt(4.0 * t * t - 1.0);
  if (shifted) {
    // P~_n(u) = sum_k (-1)^(n+k) C(n,k) C(n+k,k) u^k, exact in double for n <= 16.
    for (int n = 0; n <= max_degree; ++n) {
      std::vector<double> row(n + 1);
      long double s = std::sqrt(static_cast<long double>(2 * n + 1));
      for (int k = 0; k <= n; ++k) {
        long double c = static_cast<long double>(binom_u64(n, k)) * static_cast<long double>(binom_u64(n + k, k));
        row[k] = static_cast<double>((((n + k) % 2) ? -c : c) * s);
      }
      f.coeffs.push_back(std::move(row));
    }
    return f;
  }
  std::vector<std::vector<long double>> p(max_degree + 1);
  p[0] = {1.0L};
  if (max_degree >= 1) p[1] = {0.0L, 1.0L};
  for (int n = 1; n < max_degree; ++n) {
    std::vector<long double> next(n + 2, 0.0L);
    for (int k = 0; k <= n; ++k) next[k + 1] += (2.0L * n + 1) * p[n][k];
    for (int k = 0; k <= n - 1; ++k) next[k] -= n * p[n - 1][k];
    for (auto& v : next) v /= (n + 1);
    p[n + 1] = std::move(next);
  }
  for (int n = 0; n <= max_degree; ++n) {
    long double s = std::sqrt(static_cast<long double>(2 * n + 1));
    std::vector<double> row(n + 1);
    for (int k = 0; k <= n; ++k) row[k] = static_cast<double>(p[n][k] * s);
    f.coeffs.push_back(std::move(row));
  }
  return f;
}

// Condition number of the diagonally equilibrated Hankel moment matrix
// H_ij = m_{i+j}, i,j <= D. Returns +inf when not positive definite.
inline double hankel_condition(const std::vector<double>& m, int D) {
  int n = D + 1;
  Eigen::MatrixXd H(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) H(i, j) = m[i + j];
  for (int i = 0; i < n; ++i)
    if (!(H(i, i) > 0.0)) return std::numeric_limits<double>::infinity();
  Eigen::VectorXd s(n);
  for (int i = 0; i < n; ++i) s[i] = 1.0 / std::sqrt(H(i, i));
  Eigen::MatrixXd E = s.asDiagonal() * H * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(E, Eigen::EigenvaluesOnly);
  double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

// Orthonormal family for the measure with moments m_0..m_{2D} (more may be
// supplied; they are kept for quadrature). Modified Gram-Schmidt over the
// monomials with one reorthogonalization pass, in extended precision.
inline OrthoFamily gram_schmidt_from_moments(const std::vector<double>& moments, int max_degree) {
  detail::check_degree(max_degree);
  const int D = max_degree;
  if (static_cast<int>(moments.size()) < 2 * D + 1)
    throw InvalidArgument("need moments m_0..m_" + std::to_string(2 * D));
  if (std::abs(moments[0] - 1.0) > 1e-12) throw InvalidArgument("m_0 must equal 1");
  double cond = hankel_condition(moments, D);
  if (!(cond <= 1e12))
    throw SingularMoments("moment matrix numerically singular (condition " + std::to_string(cond) + ")");

  using Poly = std::vector<long double>;
  auto inner = [&](const Poly& a, const Poly& b) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == 0.0L) continue;
      for (std::size_t j = 0; j < b.size(); ++j) s += a[i] * b[j] * static_cast<long double>(moments[i + j]);
    }
    return s;
  };

  std::vector<Poly> q;
  for (int t = 0; t <= D; ++t) {
    Poly v(t + 1, 0.0L);
    v[t] = 1.0L;
    for (int pass = 0; pass < 2; ++pass) {
      for (int s = 0; s < t; ++s) {
        long double proj = inner(v, q[s]);
        for (int k = 0; k <= s; ++k) v[k] -= proj * q[s][k];
      }
    }
    long double nrm2 = inner(v, v);
    if (!(nrm2 > 0.0L)) throw SingularMoments("non-positive norm at degree " + std::to_string(t));
    long double nrm = std::sqrt(nrm2);
    for (auto& c : v) c /= nrm;
    q.push_back(std::move(v));
  }

  OrthoFamily f;
  f.max_degree = D;
  f.marginal = Marginal::Custom;
  f.moments = moments;
  recurrence_from_table(f, q);
  for (auto& row : q) {
    std::vector<double> r(row.size());
    for (std::size_t k = 0; k < row.size(); ++k) r[k] = static_cast<double>(row[k]);
    f.coeffs.push_back(std::move(r));
  }
  return f;
}

// Exact raw moments m_0..m_K of a standard marginal.
inline std::vector<double> marginal_moments(Marginal m, int K) {
  std::vector<double> out(K + 1, 0.0);
  for (int j = 0; j <= K; ++j) {
    switch (m) {
      case Marginal::StandardNormal: {
        if (j % 2 == 0) {
          double v = 1.0;
          for (int i = j - 1; i > 0; i -= 2) v *= i;
          out[j] = v;
        }
        break;
      }
      case Marginal::Uniform: out[j] = (j % 2 == 0) ? 1.0 / (j + 1) : 0.0; break;
      case Marginal::ShiftedUniform: out[j] = 1.0 / (j + 1); break;
      case Marginal::Custom: throw InvalidArgument("custom marginal has no closed-form moments");
    }
  }
  return out;
}

inline std::vector<double> family_moments(const OrthoFamily& f, int K) {
  if (f.marginal == Marginal::Custom) {
    if (static_cast<int>(f.moments.size()) < K + 1) throw InvalidArgument("not enough stored moments");
    return std::vector<double>(f.moments.begin(), f.moments.begin() + K + 1);
  }
  return marginal_moments(f.marginal, K);
}

// c_{t,2t}: coefficient of H_{2t} in H_t^2 (ratio of leading coefficients).
inline double top_square_coefficient(const OrthoFamily& f, int t) {
  if (2 * t > f.max_degree) throw DegreeOverflow("2t exceeds table degree");
  double lt = f.leading(t);
  return lt * lt / f.leading(2 * t);
}

// min_{1<=t<=d} c_{t,2t}; +inf for d = 0.
inline double tau_d(const OrthoFamily& f, int d) {
  if (d < 0) throw InvalidArgument("negative d");
  if (2 * d > f.max_degree) throw DegreeOverflow("tau_d needs degree 2d in the table");
  double m = std::numeric_limits<double>::infinity();
  for (int t = 1; t <= d; ++t) m = std::min(m, top_square_coefficient(f, t));
  return m;
}

struct ProductBasis {
  std::vector<OrthoFamily> families;

  ProductBasis() = default;
  explicit ProductBasis(std::vector<OrthoFamily> fs) : families(std::move(fs)) {}
  ProductBasis(const OrthoFamily& f, int dim) : families(dim, f) {}

  int dim() const { return static_cast<int>(families.size()); }
};

inline double product_eval(const ProductBasis& b, const MultiIndex& S, const std::vector<double>& point) {
  if (static_cast<int>(point.size()) != b.dim() || S.dim() != b.dim())
    throw DimensionMismatch("point/multi-index dimension " + std::to_string(point.size()) + " vs basis " +
                            std::to_string(b.dim()));
  double v = 1.0;
  for (int i = 0; i < b.dim(); ++i) {
    int s = S[i];
    if (s == 0) continue;
    if (s > b.families[i].max_degree) throw DegreeOverflow("degree above family table");
    v *= b.families[i].eval(s, point[i]);
  }
  return v;
}

struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss rule for the family's marginal; default node count max_degree + 5.
// Custom marginals use Golub-Welsch on the recurrence from the stored
// moments, limited to what those moments determine.
inline Quadrature gauss_rule(const OrthoFamily& f, int nodes = -1) {
  int n = nodes > 0 ? nodes : f.max_degree + 5;
  std::vector<double> alpha(n, 0.0), beta(std::max(n - 1, 0), 0.0);
  double mu0 = 1.0;
  switch (f.marginal) {
    case Marginal::StandardNormal:
      for (int k = 1; k < n; ++k) beta[k - 1] = std::sqrt(static_cast<double>(k));
      break;
    case Marginal::Uniform:
    case Marginal::ShiftedUniform:
      for (int k = 1; k < n; ++k) beta[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
      if (f.marginal == Marginal::ShiftedUniform) {
        for (auto& a : alpha) a = 0.5;
        for (auto& b : beta) b *= 0.5;
      }
      break;
    case Marginal::Custom: {
      // Golub-Welsch from the Cholesky factor of the (n+1)x(n+1) Hankel
      // matrix, which needs m_0..m_{2n}. Steps down n if the factorization
      // breaks.
      int avail = (static_cast<int>(f.moments.size()) - 1) / 2;
      n = std::min(n, avail);
      using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
      for (; n >= 1; --n) {
        int sz = n + 1;
        MatL H(sz, sz);
        for (int i = 0; i < sz; ++i)
          for (int j = 0; j < sz; ++j) H(i, j) = f.moments[i + j];
        Eigen::LLT<MatL> llt(H);
        if (llt.info() != Eigen::Success) continue;
        MatL R = llt.matrixU();
        bool ok = true;
        for (int j = 0; j < sz; ++j) ok = ok && R(j, j) > 0.0L;
        if (!ok) continue;
        alpha.assign(n, 0.0);
        beta.assign(n - 1, 0.0);
        for (int j = 0; j < n; ++j) {
          long double a = R(j, j + 1) / R(j, j);
          if (j > 0) a -= R(j - 1, j) / R(j - 1, j - 1);
          alpha[j] = static_cast<double>(a);
          if (j + 1 < n) beta[j] = static_cast<double>(R(j + 1, j + 1) / R(j, j));
        }
        break;
      }
      if (n < 1) throw SingularMoments("moment matrix not positive definite");
      mu0 = f.moments[0];
      break;
    }
  }
  auto [x, w] = detail::golub_welsch(alpha, beta, mu0);
  return {x, w};
}

// Gram matrix <H_i, H_j> under the family's own Gauss rule.
inline Eigen::MatrixXd quadrature_gram(const OrthoFamily& f, int nodes = -1) {
  Quadrature q = gauss_rule(f, nodes);
  int D = f.max_degree;
  // A k-node rule is exact to degree 2k-1; a custom family supplies m_0..m_{2D+2} for D+1 nodes.
  if (static_cast<int>(q.nodes.size()) < D + 1)
    throw InvalidArgument("Gauss rule has " + std::to_string(q.nodes.size()) + " nodes; the degree-" +
                          std::to_string(D) + " Gram needs " + std::to_string(D + 1));
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(D + 1, D + 1);
  for (std::size_t k = 0; k < q.nodes.size(); ++k) {
    auto v = f.eval_all(q.nodes[k]);
    for (int i = 0; i <= D; ++i)
      for (int j = 0; j <= D; ++j) G(i, j) += q.weights[k] * v[i] * v[j];
  }
  return G;
}

// Expansion of H_t^2 in the orthonormal basis: degree j -> coefficient.
// Projects with the family's Gauss rule when it integrates degree 4t exactly;
// otherwise peels monomial terms from the top degree. Coefficients below
// 1e-12 in magnitude are omitted.
inline std::map<int, double> square_expansion(const OrthoFamily& f, int t) {
  if (t < 0) throw InvalidArgument("negative t");
  if (2 * t > f.max_degree)
    throw DegreeOverflow("square of degree " + std::to_string(t) + " exceeds table degree " +
                         std::to_string(f.max_degree));
  std::vector<long double> c(2 * t + 1, 0.0L);
  Quadrature q = gauss_rule(f);
  if (static_cast<int>(q.nodes.size()) >= 2 * t + 1) {
    std::vector<double> v(f.max_degree + 1);
    for (std::size_t k = 0; k < q.nodes.size(); ++k) {
      f.eval_into(q.nodes[k], v.data());
      long double w = static_cast<long double>(q.weights[k]) * v[t] * v[t];
      for (int j = 0; j <= 2 * t; ++j) c[j] += w * v[j];
    }
  } else {
    const auto& h = f.coeffs[t];
    std::vector<long double> sq(2 * t + 1, 0.0L);
    for (int i = 0; i <= t; ++i)
      for (int j = 0; j <= t; ++j) sq[i + j] += static_cast<long double>(h[i]) * h[j];
    for (int j = 2 * t; j >= 0; --j) {
      c[j] = sq[j] / f.coeffs[j][j];
      for (int k = 0; k <= j; ++k) sq[k] -= c[j] * f.coeffs[j][k];
    }
  }
  std::map<int, double> out;
  for (int j = 0; j <= 2 * t; ++j)
    if (std::abs(static_cast<double>(c[j])) > 1e-12) out[j] = static_cast<double>(c[j]);
  return out;
}

// Plain-text table: header "marginal <name> max_degree <D> [moments m0 ...]",
// then one row of monomial coefficients per degree.
inline void write_family(std::ostream& os, const OrthoFamily& f) {
  os.precision(17);
  os << "marginal " << marginal_name(f.marginal) << " max_degree " << f.max_degree;
  if (f.marginal == Marginal::Custom) {
    os << " moments";
    for (double m : f.moments) os << ' ' << m;
  }
  os << '\n';
  for (const auto& row : f.coeffs) {
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? " " : "") << row[k];
    os << '\n';
  }
}

inline OrthoFamily read_family(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty family table");
  std::istringstream hs(line);
  std::string tag, name, dtag;
  OrthoFamily f;
  if (!(hs >> tag >> name >> dtag >> f.max_degree) || tag != "marginal" || dtag != "max_degree")
    throw ParseError("bad family header: " + line);
  f.marginal = parse_marginal(name);
  std::string mtag;
  if (hs >> mtag) {
    if (mtag != "moments") throw ParseError("unexpected header token " + mtag);
    double m;
    while (hs >> m) f.moments.push_back(m);
  }
  for (int t = 0; t <= f.max_degree; ++t) {
    if (!std::getline(is, line)) throw ParseError("missing row " + std::to_string(t));
    std::istringstream rs(line);
    std::vector<double> row;
    double c;
    while (rs >> c) row.push_back(c);
    if (static_cast<int>(row.size()) != t + 1) throw ParseError("row " + std::to_string(t) + " has wrong length");
    f.coeffs.push_back(std::move(row));
  }
  switch (f.marginal) {
    case Marginal::StandardNormal: {
      auto g = hermite_family(f.max_degree);
      f.rec_a = g.rec_a, f.rec_b = g.rec_b;
      break;
    }
    case Marginal::Uniform:
    case Marginal::ShiftedUniform: {
      auto g = legendre_family(f.max_degree, f.marginal == Marginal::ShiftedUniform);
      f.rec_a = g.rec_a, f.rec_b = g.rec_b;
      break;
    }
    case Marginal::Custom:
      recurrence_from_table(f, f.coeffs);
      break;
  }
  return f;
}

}  // namespace invlab

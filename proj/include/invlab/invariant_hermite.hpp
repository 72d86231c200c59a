#pragma once

#include <cmath>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "invlab/common.hpp"
#include "invlab/orthopoly.hpp"

namespace invlab {

using Adjacency = Eigen::MatrixXi;

// Row-normalized graph operator: self-loops added, then row v scaled by
// 1/sqrt(row sum) so every row has unit squared norm.
struct GraphShift {
  int n = 0;
  Eigen::MatrixXd matrix;
  Eigen::MatrixXd gram;  // rho_{vv'} = sum_u A_vu A_v'u
};

inline GraphShift normalize_shift(const Adjacency& adj) {
  if (adj.rows() != adj.cols()) throw DimensionMismatch("adjacency must be square");
  if (adj.rows() < 1) throw InvalidArgument("graph needs at least one node");
  int n = static_cast<int>(adj.rows());
  GraphShift s;
  s.n = n;
  s.matrix = Eigen::MatrixXd::Zero(n, n);
  for (int v = 0; v < n; ++v) {
    double deg = 0.0;
    for (int u = 0; u < n; ++u) {
      double m = (u == v || adj(v, u) != 0) ? 1.0 : 0.0;
      s.matrix(v, u) = m;
      deg += m;
    }
    s.matrix.row(v) /= std::sqrt(deg);
  }
  s.gram = s.matrix * s.matrix.transpose();
  return s;
}

// c_J = (1/n) sum_{v,v'} rho_{vv'}^{|J|}.
inline double c_J(const GraphShift& s, int total_degree) {
  if (total_degree < 0) throw InvalidArgument("negative degree");
  long double acc = 0.0L;
  for (int v = 0; v < s.n; ++v)
    for (int w = 0; w < s.n; ++w) acc += std::pow(static_cast<long double>(s.gram(v, w)), total_degree);
  return static_cast<double>(acc / s.n);
}

// Evaluates many invariant Hermite polynomials on one input, sharing the
// univariate Hermite tables.
class HermiteEvaluator {
 public:
  HermiteEvaluator(const GraphShift& s, std::vector<MultiIndex> Js) : shift_(s), Js_(std::move(Js)) {
    if (Js_.empty()) throw InvalidArgument("no multi-indices");
    d_ = Js_.front().dim();
    int maxdeg = 0;
    for (const auto& J : Js_) {
      if (J.dim() != d_) throw DimensionMismatch("multi-indices of different dimension");
      for (int j = 0; j < d_; ++j) maxdeg = std::max(maxdeg, J[j]);
    }
    herm_ = hermite_family(std::max(maxdeg, 1));
  }

  int d() const { return d_; }
  std::size_t size() const { return Js_.size(); }
  const std::vector<MultiIndex>& indices() const { return Js_; }

  // out[i] = H_{J_i}^A(X).
  void eval(const Eigen::MatrixXd& X, double* out) const {
    if (X.rows() != shift_.n || X.cols() != d_) throw DimensionMismatch("X must be n x d");
    Eigen::MatrixXd Y = shift_.matrix * X;
    int D = herm_.max_degree;
    std::vector<double> table(static_cast<std::size_t>(shift_.n) * d_ * (D + 1));
    for (int v = 0; v < shift_.n; ++v)
      for (int j = 0; j < d_; ++j) herm_.eval_into(Y(v, j), &table[(static_cast<std::size_t>(v) * d_ + j) * (D + 1)]);
    double scale = 1.0 / std::sqrt(static_cast<double>(shift_.n));
    for (std::size_t i = 0; i < Js_.size(); ++i) {
      double acc = 0.0;
      for (int v = 0; v < shift_.n; ++v) {
        double p = 1.0;
        for (int j = 0; j < d_; ++j) p *= table[(static_cast<std::size_t>(v) * d_ + j) * (D + 1) + Js_[i][j]];
        acc += p;
      }
      out[i] = acc * scale;
    }
  }

 private:
  const GraphShift& shift_;
  std::vector<MultiIndex> Js_;
  int d_ = 0;
  OrthoFamily herm_;
};

// H_J^A(X) = (1/sqrt n) sum_v H_J((AX)_v).
inline double eval_HJA(const GraphShift& s, const MultiIndex& J, const Eigen::MatrixXd& X) {
  if (X.cols() != J.dim() || X.rows() != s.n) throw DimensionMismatch("X must be n x |J| dims");
  HermiteEvaluator ev(s, {J});
  double out;
  ev.eval(X, &out);
  return out;
}

struct McEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
};

struct McGram {
  Eigen::MatrixXd estimate;
  Eigen::MatrixXd stderr_;
  long samples = 0;
};

namespace detail {

inline constexpr int kMcChunks = 64;

inline Eigen::MatrixXd gaussian_matrix(Random& rng, int n, int d) {
  Eigen::MatrixXd X(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = rng.normal();
  return X;
}

// Moments of products of m features over `samples` draws, computed in fixed
// seed-partitioned chunks and reduced in chunk order.
inline McGram mc_product_moments(long samples, std::uint64_t seed, int m,
                                 const std::function<void(Random&, double*)>& draw) {
  if (samples < 2) throw InvalidArgument("need at least 2 samples");
  int chunks = static_cast<int>(std::min<long>(kMcChunks, samples));
  std::vector<Eigen::MatrixXd> s1(chunks), s2(chunks);
  parallel_chunks(chunks, [&](int c) {
    long lo = samples * c / chunks, hi = samples * (c + 1) / chunks;
    Random rng(seed, static_cast<std::uint64_t>(c) + 1);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m), b = Eigen::MatrixXd::Zero(m, m);
    std::vector<double> f(m);
    for (long t = lo; t < hi; ++t) {
      draw(rng, f.data());
      for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
          double p = f[i] * f[j];
          a(i, j) += p;
          b(i, j) += p * p;
        }
    }
    s1[c] = a;
    s2[c] = b;
  });
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m), b = Eigen::MatrixXd::Zero(m, m);
  for (int c = 0; c < chunks; ++c) a += s1[c], b += s2[c];
  McGram g;
  g.samples = samples;
  g.estimate.resize(m, m);
  g.stderr_.resize(m, m);
  double N = static_cast<double>(samples);
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      double mean = a(i, j) / N;
      double var = std::max((b(i, j) - N * mean * mean) / (N - 1), 0.0);
      g.estimate(i, j) = g.estimate(j, i) = mean;
      g.stderr_(i, j) = g.stderr_(j, i) = std::sqrt(var / N);
    }
  return g;
}

}  // namespace detail

// MC Gram matrix of the invariant Hermite polynomials for the given indices
// over X with standard normal entries.
inline McGram mc_gram_HJA(const GraphShift& s, const std::vector<MultiIndex>& Js, long samples, std::uint64_t seed) {
  HermiteEvaluator ev(s, Js);
  int m = static_cast<int>(Js.size()), d = ev.d();
  return detail::mc_product_moments(samples, seed, m, [&](Random& rng, double* out) {
    ev.eval(detail::gaussian_matrix(rng, s.n, d), out);
  });
}

inline McEstimate mc_inner_HJA(const GraphShift& s, const MultiIndex& J, const MultiIndex& K, long samples,
                               std::uint64_t seed) {
  if (J.dim() != K.dim()) throw DimensionMismatch("J and K differ in dimension");
  auto g = mc_gram_HJA(s, {J, K}, samples, seed);
  return {g.estimate(0, 1), g.stderr_(0, 1)};
}

// E[H_i(x) H_j(y)] for standard normals with correlation rho.
inline McEstimate mc_mehler(double rho, int i, int j, long samples, std::uint64_t seed) {
  if (std::abs(rho) > 1.0) throw InvalidArgument("|rho| must be <= 1");
  auto h = hermite_family(std::max({i, j, 1}));
  double c = std::sqrt(1.0 - rho * rho);
  auto g = detail::mc_product_moments(samples, seed, 2, [&](Random& rng, double* out) {
    double x = rng.normal(), y = rho * x + c * rng.normal();
    out[0] = h.eval(i, x);
    out[1] = h.eval(j, y);
  });
  return {g.estimate(0, 1), g.stderr_(0, 1)};
}

using MatrixFn = std::function<double(const Eigen::MatrixXd&)>;

// MC estimate of <f, H_J^A> / c_J over X with standard normal entries (n x d).
inline McEstimate hermite_projection(const MatrixFn& f, const GraphShift& s, const MultiIndex& J, long samples,
                                     std::uint64_t seed) {
  HermiteEvaluator ev(s, {J});
  int d = J.dim();
  auto g = detail::mc_product_moments(samples, seed, 2, [&](Random& rng, double* out) {
    Eigen::MatrixXd X = detail::gaussian_matrix(rng, s.n, d);
    out[0] = f(X);
    ev.eval(X, &out[1]);
  });
  double cj = c_J(s, J.total());
  return {g.estimate(0, 1) / cj, g.stderr_(0, 1) / cj};
}

// ---------------------------------------------------------------------------
// Graph input.

// Edge list, one "u v" pair per line (0-indexed). Blank lines and lines
// starting with '#' are skipped. Undirected unless `directed`.
inline Adjacency read_edge_list(std::istream& is, int n = -1, bool directed = false) {
  std::vector<std::pair<int, int>> edges;
  std::string line;
  int maxv = -1, lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto p = line.find_first_not_of(" \t\r");
    if (p == std::string::npos || line[p] == '#') continue;
    std::istringstream ls(line);
    int u, v;
    std::string extra;
    if (!(ls >> u >> v) || (ls >> extra)) throw ParseError("bad edge at line " + std::to_string(lineno));
    if (u < 0 || v < 0) throw ParseError("negative node id at line " + std::to_string(lineno));
    edges.emplace_back(u, v);
    maxv = std::max({maxv, u, v});
  }
  if (n < 0) n = maxv + 1;
  if (n < 1) throw ParseError("empty graph");
  if (maxv >= n) throw ParseError("node id exceeds n");
  Adjacency A = Adjacency::Zero(n, n);
  for (auto [u, v] : edges) {
    A(u, v) = 1;
    if (!directed) A(v, u) = 1;
  }
  return A;
}

// Writes the upper triangle (diagonal included) as "u v" lines, the inverse of
// read_edge_list for symmetric matrices. A leading comment records n.
inline void write_edge_list(std::ostream& os, const Adjacency& A) {
  if (A.rows() != A.cols()) throw DimensionMismatch("adjacency must be square");
  os << "# n " << A.rows() << '\n';
  for (int u = 0; u < A.rows(); ++u)
    for (int v = u; v < A.cols(); ++v)
      if (A(u, v) != 0) os << u << ' ' << v << '\n';
}

// Dense 0/1 matrix, one comma-separated row per line.
inline Adjacency read_dense_csv(std::istream& is) {
  std::vector<std::vector<int>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<int> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        int v = std::stoi(cell, &used);
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw ParseError("bad CSV cell '" + cell + "'");
        if (v != 0 && v != 1) throw ParseError("adjacency entries must be 0 or 1");
        row.push_back(v);
      } catch (const std::logic_error&) {
        throw ParseError("bad CSV cell '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  int n = static_cast<int>(rows.size());
  if (n == 0) throw ParseError("empty matrix");
  Adjacency A(n, n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rows[i].size()) != n) throw ParseError("matrix is not square");
    for (int j = 0; j < n; ++j) A(i, j) = rows[i][j];
  }
  return A;
}

inline Adjacency permute_adjacency(const Adjacency& A, const std::vector<int>& image) {
  int n = static_cast<int>(A.rows());
  Adjacency B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(image[i], image[j]) = A(i, j);
  return B;
}

inline Adjacency random_graph(Random& rng, int n, double p = 0.5) {
  Adjacency A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = rng.uniform() < p ? 1 : 0;
  return A;
}

}  // namespace invlab

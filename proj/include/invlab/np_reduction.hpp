#pragma once

#include <cctype>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "invlab/common.hpp"
#include "invlab/invariant_hermite.hpp"

namespace invlab {

// ---------------------------------------------------------------------------
// Halfspace instances over {0,1}^n with +-1 labels.

struct HalfspaceDataset {
  int n = 0;
  std::vector<std::vector<int>> points;
  std::vector<int> labels;

  void validate() const {
    if (n < 1) throw InvalidArgument("halfspace dimension must be >= 1");
    if (points.size() != labels.size()) throw DimensionMismatch("points and labels differ in count");
    for (const auto& p : points) {
      if (static_cast<int>(p.size()) != n) throw DimensionMismatch("point length differs from n");
      for (int b : p)
        if (b != 0 && b != 1) throw InvalidArgument("point entries must be 0 or 1");
    }
    for (int y : labels)
      if (y != 1 && y != -1) throw InvalidArgument("labels must be +1 or -1");
  }
};

// CSV with header "x0,...,x{n-1},label".
inline void write_halfspace_csv(std::ostream& os, const HalfspaceDataset& ds) {
  ds.validate();
  for (int j = 0; j < ds.n; ++j) os << 'x' << j << ',';
  os << "label\n";
  for (std::size_t i = 0; i < ds.points.size(); ++i) {
    for (int b : ds.points[i]) os << b << ',';
    os << ds.labels[i] << '\n';
  }
}

// Accepts an optional header line (detected by a non-numeric first cell).
inline HalfspaceDataset read_halfspace_csv(std::istream& is) {
  HalfspaceDataset ds;
  std::string line;
  int lineno = 0;
  bool first = true;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (first) {
      first = false;
      auto p = cells.empty() ? std::string::npos : cells[0].find_first_not_of(" \t");
      if (p != std::string::npos && !(std::isdigit(static_cast<unsigned char>(cells[0][p])) || cells[0][p] == '-'))
        continue;
    }
    if (cells.size() < 2) throw ParseError("row needs bits and a label at line " + std::to_string(lineno));
    std::vector<int> vals;
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        int v = std::stoi(c, &used);
        if (c.find_first_not_of(" \t\r", used) != std::string::npos) throw ParseError("bad cell '" + c + "'");
        vals.push_back(v);
      } catch (const std::logic_error&) {
        throw ParseError("bad cell '" + c + "' at line " + std::to_string(lineno));
      }
    }
    int n = static_cast<int>(vals.size()) - 1;
    if (ds.n == 0) ds.n = n;
    if (n != ds.n) throw ParseError("ragged row at line " + std::to_string(lineno));
    ds.labels.push_back(vals.back());
    vals.pop_back();
    ds.points.push_back(std::move(vals));
  }
  if (ds.points.empty()) throw ParseError("no rows");
  try {
    ds.validate();
  } catch (const Error& e) {
    throw ParseError(e.what());
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Reduction to graphs: an l-clique (self-loops included) occupies nodes
// [l(l-1)/2, l(l+1)/2) whenever bit l is set; features are all -1.

inline int reduced_node_count(int n) { return n * (n + 1) / 2; }

struct ReducedGraph {
  Adjacency A;
  Eigen::VectorXd x;
  int y = 1;
};

inline Adjacency reduce_point(const std::vector<int>& bits) {
  int n = static_cast<int>(bits.size());
  if (n < 1) throw InvalidArgument("point must have at least one bit");
  int N = reduced_node_count(n);
  Adjacency A = Adjacency::Zero(N, N);
  for (int l = 1; l <= n; ++l) {
    if (bits[l - 1] != 0 && bits[l - 1] != 1) throw InvalidArgument("point entries must be 0 or 1");
    if (!bits[l - 1]) continue;
    int off = l * (l - 1) / 2;
    A.block(off, off, l, l).setOnes();
  }
  return A;
}

inline std::vector<ReducedGraph> reduce_halfspace_to_graphs(const HalfspaceDataset& ds) {
  ds.validate();
  std::vector<ReducedGraph> out;
  out.reserve(ds.points.size());
  int N = reduced_node_count(ds.n);
  for (std::size_t i = 0; i < ds.points.size(); ++i)
    out.push_back({reduce_point(ds.points[i]), Eigen::VectorXd::Constant(N, -1.0), ds.labels[i]});
  return out;
}

// Recovers r_l = 1[an l-clique component exists] from the graph alone by
// reading connected components. Every component must be a self-looped clique
// and sizes must be distinct; isolated loop-free nodes are padding.
inline std::vector<int> clique_indicator(const Adjacency& A, int n) {
  if (A.rows() != A.cols()) throw DimensionMismatch("adjacency must be square");
  int N = static_cast<int>(A.rows());
  std::vector<int> r(n, 0), comp(N, -1);
  for (int s = 0; s < N; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> members{s};
    comp[s] = s;
    for (std::size_t h = 0; h < members.size(); ++h)
      for (int u = 0; u < N; ++u)
        if (comp[u] < 0 && (A(members[h], u) || A(u, members[h]))) {
          comp[u] = s;
          members.push_back(u);
        }
    int size = static_cast<int>(members.size());
    if (size == 1 && A(s, s) == 0) continue;
    for (int u : members)
      for (int v : members)
        if (A(u, v) != 1) throw InvalidArgument("component is not a self-looped clique");
    if (size > n) throw InvalidArgument("clique larger than n");
    if (r[size - 1]) throw InvalidArgument("two cliques of the same size");
    r[size - 1] = 1;
  }
  return r;
}

// ---------------------------------------------------------------------------
// One-layer clique GNN: c + sum_i 1^T relu(x + a_i A x) b_i.

struct CliqueGNN {
  int k = 0;
  Eigen::VectorXd a, b;
  double c = 0.0;
};

inline double eval_clique_gnn(const CliqueGNN& g, const Eigen::VectorXd& x, const Adjacency& A) {
  if (g.a.size() != g.k || g.b.size() != g.k) throw DimensionMismatch("a and b must have length k");
  if (A.rows() != A.cols() || A.rows() != x.size()) throw DimensionMismatch("adjacency and features disagree");
  Eigen::VectorXd Ax = A.cast<double>() * x;
  double out = g.c;
  for (int i = 0; i < g.k; ++i) out += g.b[i] * (x + g.a[i] * Ax).cwiseMax(0.0).sum();
  return out;
}

// M_{jl} = l * relu(-1 - l a_j), both indices 1-based.
inline Eigen::MatrixXd reduction_matrix(const Eigen::VectorXd& a, int n) {
  Eigen::MatrixXd M(a.size(), n);
  for (int j = 0; j < a.size(); ++j)
    for (int l = 1; l <= n; ++l) M(j, l - 1) = l * std::max(0.0, -1.0 - l * a[j]);
  return M;
}

// The same network evaluated on the clique indicator vector instead of the graph.
inline double eval_clique_gnn_on_indicator(const CliqueGNN& g, const std::vector<int>& r) {
  int n = static_cast<int>(r.size());
  Eigen::VectorXd rv(n);
  for (int l = 0; l < n; ++l) rv[l] = r[l];
  return g.c + g.b.dot(reduction_matrix(g.a, n) * rv);
}

struct Halfspace {
  Eigen::VectorXd v;
  double theta = 0.0;
};

// Ties count as positive.
inline int sign_label(double value) { return value >= 0.0 ? 1 : -1; }

inline double halfspace_margin(const Halfspace& h, const std::vector<int>& x) {
  if (static_cast<int>(x.size()) != h.v.size()) throw DimensionMismatch("point length differs from v");
  double s = -h.theta;
  for (int i = 0; i < h.v.size(); ++i) s += h.v[i] * x[i];
  return s;
}

inline Eigen::VectorXd reduction_channel_slopes(int n) {
  Eigen::VectorXd a(n);
  for (int j = 1; j <= n; ++j) a[j - 1] = 1.0 / (0.5 - j);
  return a;
}

inline constexpr double kMaxReductionCondition = 1e12;

// Solves b^T M = v^T with a_j = (1/2 - j)^{-1}, which makes M upper triangular
// with a nonzero diagonal. The empty graph contributes relu(-1) = 0 on every
// node, so the absorbed constant is zero and c = -theta.
inline CliqueGNN halfspace_to_gnn_weights(const Eigen::VectorXd& v, double theta, int n) {
  if (n < 1) throw InvalidArgument("n must be >= 1");
  if (v.size() != n) throw DimensionMismatch("v must have length n");
  CliqueGNN g;
  g.k = n;
  g.a = reduction_channel_slopes(n);
  Eigen::MatrixXd M = reduction_matrix(g.a, n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& sv = svd.singularValues();
  double cond = sv[n - 1] > 0.0 ? sv[0] / sv[n - 1] : std::numeric_limits<double>::infinity();
  if (!(cond <= kMaxReductionCondition)) throw SingularM("reduction matrix condition " + std::to_string(cond));
  g.b = M.transpose().partialPivLu().solve(v);
  double resid = (M.transpose() * g.b - v).norm();
  if (!(resid < 1e-8 * std::max(1.0, v.norm()))) throw SingularM("reduction solve residual " + std::to_string(resid));
  g.c = -theta;
  return g;
}

inline Halfspace gnn_to_halfspace(const CliqueGNN& g, int n) {
  if (g.k < 1 || g.a.size() != g.k || g.b.size() != g.k) throw DimensionMismatch("a and b must have length k");
  if (n < 1) throw InvalidArgument("n must be >= 1");
  Halfspace h;
  h.v = reduction_matrix(g.a, n).transpose() * g.b;
  h.theta = -g.c;
  return h;
}

// Fraction of positions where the predicted sign matches the label.
inline double agreement(const std::vector<int>& labels, const std::vector<int>& predicted) {
  if (labels.size() != predicted.size()) throw DimensionMismatch("label and prediction counts differ");
  if (labels.empty()) throw InvalidArgument("empty dataset");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += labels[i] == predicted[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

inline std::vector<int> gnn_predictions(const CliqueGNN& g, const std::vector<ReducedGraph>& graphs) {
  std::vector<int> out;
  out.reserve(graphs.size());
  for (const auto& rg : graphs) out.push_back(sign_label(eval_clique_gnn(g, rg.x, rg.A)));
  return out;
}

inline std::vector<int> halfspace_predictions(const Halfspace& h, const HalfspaceDataset& ds) {
  std::vector<int> out;
  out.reserve(ds.points.size());
  for (const auto& p : ds.points) out.push_back(sign_label(halfspace_margin(h, p)));
  return out;
}

// All 2^n points of {0,1}^n, bit l of the index giving coordinate l.
inline std::vector<std::vector<int>> all_points(int n) {
  if (n < 1 || n > 20) throw InvalidArgument("all_points needs 1 <= n <= 20");
  std::vector<std::vector<int>> out(std::size_t{1} << n, std::vector<int>(n));
  for (std::size_t m = 0; m < out.size(); ++m)
    for (int l = 0; l < n; ++l) out[m][l] = static_cast<int>((m >> l) & 1U);
  return out;
}

}  // namespace invlab

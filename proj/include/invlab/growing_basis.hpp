#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "invlab/common.hpp"
#include "invlab/orthopoly.hpp"
#include "invlab/sq_oracle.hpp"

namespace invlab {

// ---------------------------------------------------------------------------
// Generator maps and their pushforward laws.

enum class GeneratorKind { SignAbs, RowNorms, Custom };

struct GeneratorMap {
  GeneratorKind kind = GeneratorKind::SignAbs;
  int r = 0;
  int cols = 3;  // RowNorms: columns per row
  // Custom: input sampler, generators, and one marginal family per generator.
  PointSampler input_sampler;
  std::vector<std::function<double(const Point&)>> generators;
  std::vector<OrthoFamily> marginals;

  static GeneratorMap sign_abs(int r) { return {GeneratorKind::SignAbs, r, 0, {}, {}, {}}; }
  static GeneratorMap row_norms(int r, int cols = 3) { return {GeneratorKind::RowNorms, r, cols, {}, {}, {}}; }

  // Raw input: a length-r vector (SignAbs) or an r x cols matrix stored row-major (RowNorms).
  Point sample_input(Random& rng) const {
    switch (kind) {
      case GeneratorKind::SignAbs: {
        Point x(r);
        for (int i = 0; i < r; ++i) x[i] = rng.uniform(-1.0, 1.0);
        return x;
      }
      case GeneratorKind::RowNorms: {
        Point x(r * cols);
        for (int i = 0; i < r * cols; ++i) x[i] = rng.normal();
        return x;
      }
      case GeneratorKind::Custom: return input_sampler(rng);
    }
    return {};
  }

  Point apply(const Point& x) const {
    Point g(r);
    switch (kind) {
      case GeneratorKind::SignAbs:
        if (x.size() != r) throw DimensionMismatch("SignAbs input must have length r");
        for (int i = 0; i < r; ++i) g[i] = std::abs(x[i]);
        break;
      case GeneratorKind::RowNorms:
        if (x.size() != r * cols) throw DimensionMismatch("RowNorms input must have r*cols entries");
        for (int i = 0; i < r; ++i) g[i] = x.segment(i * cols, cols).squaredNorm();
        break;
      case GeneratorKind::Custom:
        if (static_cast<int>(generators.size()) != r) throw DimensionMismatch("custom map needs r generators");
        for (int i = 0; i < r; ++i) g[i] = generators[i](x);
        break;
    }
    return g;
  }

  // Orthonormal family for the pushforward marginal of each generator.
  OrthoFamily marginal_family(int i, int max_degree) const {
    switch (kind) {
      case GeneratorKind::SignAbs: return legendre_family(max_degree, true);
      case GeneratorKind::RowNorms: return gram_schmidt_from_moments(chi_squared_moments(cols, 2 * max_degree), max_degree);
      case GeneratorKind::Custom: return marginals.at(i);
    }
    return {};
  }

  ProductBasis basis(int max_degree) const {
    std::vector<OrthoFamily> fs;
    for (int i = 0; i < r; ++i) fs.push_back(marginal_family(i, max_degree));
    return ProductBasis(std::move(fs));
  }

  // m_j = prod_{i<j} (c + 2i), the raw moments of chi-squared(c).
  static std::vector<double> chi_squared_moments(int c, int upto) {
    std::vector<double> m(upto + 1, 1.0);
    for (int j = 1; j <= upto; ++j) m[j] = m[j - 1] * (c + 2.0 * (j - 1));
    return m;
  }
};

inline PointSampler pushforward_sampler(const GeneratorMap& map) {
  return [map](Random& rng) { return map.apply(map.sample_input(rng)); };
}

// Seeded stream of pushforward draws.
class Pushforward {
 public:
  Pushforward(GeneratorMap map, std::uint64_t seed) : map_(std::move(map)), rng_(seed) {}
  Point next() { return map_.apply(map_.sample_input(rng_)); }

 private:
  GeneratorMap map_;
  Random rng_;
};

// Two-sided Kolmogorov-Smirnov statistic of `xs` against `cdf`.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  if (xs.empty()) throw InvalidArgument("no samples");
  std::sort(xs.begin(), xs.end());
  double n = static_cast<double>(xs.size()), D = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double F = cdf(xs[i]);
    D = std::max({D, (i + 1) / n - F, F - i / n});
  }
  return D;
}

// ---------------------------------------------------------------------------
// Sparse polynomials in a product basis.

struct SparsePoly {
  std::vector<std::pair<MultiIndex, double>> terms;
  ProductBasis basis;

  std::size_t size() const { return terms.size(); }

  std::map<std::vector<int>, double> as_map() const {
    std::map<std::vector<int>, double> m;
    for (const auto& [v, c] : terms) m[v.degrees] = c;
    return m;
  }

  std::vector<MultiIndex> support() const {
    std::vector<MultiIndex> s;
    for (const auto& t : terms) s.push_back(t.first);
    std::sort(s.begin(), s.end());
    return s;
  }
};

inline constexpr double kPruneThreshold = 1e-12;

inline SparsePoly make_sparse(const ProductBasis& basis, const std::vector<std::pair<MultiIndex, double>>& terms) {
  SparsePoly p;
  p.basis = basis;
  std::map<std::vector<int>, double> seen;
  for (const auto& [v, c] : terms) {
    if (v.dim() != basis.dim()) throw DimensionMismatch("multi-index dimension differs from basis");
    seen[v.degrees] += c;
  }
  for (const auto& [v, c] : seen)
    if (std::abs(c) > kPruneThreshold) p.terms.emplace_back(MultiIndex(v), c);
  std::sort(p.terms.begin(), p.terms.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return p;
}

namespace detail {

// H_v(point) over the first v.dim() coordinates of `point`.
inline double prefix_eval(const ProductBasis& b, const std::vector<int>& v, const Point& x) {
  double out = 1.0;
  for (std::size_t j = 0; j < v.size(); ++j)
    if (v[j] != 0) out *= b.families[j].eval(v[j], x[static_cast<Eigen::Index>(j)]);
  return out;
}

// sup |H_t| over the support, where known in closed form.
inline double family_sup(const OrthoFamily& f, int t) {
  if (t == 0) return 1.0;
  if (f.marginal == Marginal::ShiftedUniform || f.marginal == Marginal::Uniform) return std::sqrt(2.0 * t + 1.0);
  return std::numeric_limits<double>::infinity();
}

inline double prefix_sup(const ProductBasis& b, const std::vector<int>& v) {
  double s = 1.0;
  for (std::size_t j = 0; j < v.size(); ++j) s *= family_sup(b.families[j], v[j]);
  return s;
}

}  // namespace detail

inline double eval_sparse(const SparsePoly& p, const Point& x) {
  if (x.size() != p.basis.dim()) throw DimensionMismatch("point dimension differs from basis");
  double s = 0.0;
  for (const auto& [v, c] : p.terms) s += c * detail::prefix_eval(p.basis, v.degrees, x);
  return s;
}

// sup |f| bound from the coefficients and closed-form sup norms.
inline double sparse_sup_bound(const SparsePoly& p) {
  double s = 0.0;
  for (const auto& [v, c] : p.terms) s += std::abs(c) * detail::prefix_sup(p.basis, v.degrees);
  return s;
}

// ---------------------------------------------------------------------------
// Learner.

struct LearnerConfig {
  int d = 3;
  int k = 1;
  double epsilon = 0.1;
  double detection_threshold = 0.0;  // <= 0 selects the default
  double mhat = 0.0;                 // bound on |H_{2q} f*^2| used to normalize f^2 queries
  double mhat_f = 0.0;               // bound on |H_v| used to normalize f queries (<= 0: closed-form sup)
};

inline double min_tau_d(const ProductBasis& b, int d) {
  double t = std::numeric_limits<double>::infinity();
  for (const auto& f : b.families) t = std::min(t, tau_d(f, d));
  return t;
}

inline double default_detection_threshold(const LearnerConfig& c, int r, double taud) {
  return c.epsilon * std::pow(taud, c.d) / (2.0 * c.k * r * std::max(c.d, 1));
}

// Bound on |H_{2q} f^2| over |q| <= d from a bound on |f|.
inline double mhat_from_label_bound(const ProductBasis& b, int d, double label_bound) {
  double s = 1.0;
  for (const auto& q : enumerate_multi_indices(b.dim(), d)) {
    std::vector<int> q2(q.degrees);
    for (int& x : q2) x *= 2;
    s = std::max(s, detail::prefix_sup(b, q2));
  }
  return label_bound * label_bound * s;
}

struct LearnReport {
  SparsePoly poly;
  long queries = 0;
  std::vector<std::size_t> live_sizes;  // live prefixes after each generator
  double detection_threshold = 0.0;
  double detection_tolerance = 0.0;
};

// Processes generators left to right. For each live prefix p and degree t,
// D(q) = <f^2, H_{2q}> with q = (p, t) is queried on the f^2 oracle. Since
// H_s^2 = sum_t c_{s,2t} H_{2t}, D(q) = sum_{q' >= q} prod_j c_{q'_j,2q_j} W(q'),
// where W(q') is the squared mass of support terms with prefix q'. The
// triangular system over the candidate set is solved for W, and q is kept
// when |W(q)| >= threshold * tau_d^{|q|}. Surviving multi-indices get one
// <H_v, f> query each; coefficients below epsilon/(2 sqrt k) are pruned.
inline LearnReport growing_basis_learn(SQOracle& oracle_f, SQOracle& oracle_fsq, const ProductBasis& basis,
                                       const LearnerConfig& cfg) {
  int r = basis.dim(), d = cfg.d;
  if (d < 0 || cfg.k < 1 || !(cfg.epsilon > 0.0)) throw InvalidArgument("need d >= 0, k >= 1, epsilon > 0");
  if (!(cfg.mhat > 0.0)) throw InvalidArgument("mhat must be positive");
  for (const auto& f : basis.families)
    if (f.max_degree < 2 * d) throw DegreeOverflow("basis tables must reach degree 2d");
  double taud = min_tau_d(basis, d);
  LearnReport rep;
  rep.detection_threshold = cfg.detection_threshold > 0.0 ? cfg.detection_threshold
                                                           : default_detection_threshold(cfg, r, taud);
  double det_precision = rep.detection_threshold * std::pow(taud, 2 * d) / 8.0;
  rep.detection_tolerance = det_precision / cfg.mhat;
  std::size_t cap = 4 * static_cast<std::size_t>(cfg.k);

  // c[j][s][t] = coefficient of H_{2t} in H_s^2 for generator j.
  std::vector<std::vector<std::vector<double>>> c(r, std::vector<std::vector<double>>(d + 1, std::vector<double>(d + 1, 0.0)));
  for (int j = 0; j < r; ++j)
    for (int s = 0; s <= d; ++s) {
      auto e = square_expansion(basis.families[j], s);
      for (int t = 0; t <= s; ++t) c[j][s][t] = e.count(2 * t) ? e.at(2 * t) : 0.0;
    }

  std::vector<std::vector<int>> live = {{}};
  for (int i = 0; i < r; ++i) {
    std::vector<std::vector<int>> cand;
    for (const auto& p : live) {
      int used = std::accumulate(p.begin(), p.end(), 0);
      for (int t = 0; t + used <= d; ++t) {
        auto q = p;
        q.push_back(t);
        cand.push_back(std::move(q));
      }
    }
    std::vector<double> D(cand.size());
    for (std::size_t a = 0; a < cand.size(); ++a) {
      std::vector<int> q2 = cand[a];
      for (int& x : q2) x *= 2;
      double m = cfg.mhat;
      double ans = oracle_fsq.sq_query(
          [&](const Point& x, double y) { return std::clamp(detail::prefix_eval(basis, q2, x) * y / m, -1.0, 1.0); },
          rep.detection_tolerance);
      D[a] = ans * m;
    }
    // Solve in order of decreasing total degree.
    std::vector<std::size_t> order(cand.size());
    std::iota(order.begin(), order.end(), 0);
    auto total = [&](std::size_t a) { return std::accumulate(cand[a].begin(), cand[a].end(), 0); };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return total(a) > total(b); });
    auto mix = [&](const std::vector<int>& hi, const std::vector<int>& lo) {
      double m = 1.0;
      for (int j = 0; j <= i; ++j) {
        if (hi[j] < lo[j]) return 0.0;
        m *= c[j][hi[j]][lo[j]];
      }
      return m;
    };
    std::vector<double> W(cand.size(), 0.0);
    std::vector<std::vector<int>> kept;
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
      std::size_t a = order[oi];
      double rhs = D[a];
      for (std::size_t oj = 0; oj < oi; ++oj) {
        std::size_t b = order[oj];
        if (cand[b] != cand[a]) rhs -= mix(cand[b], cand[a]) * W[b];
      }
      W[a] = rhs / mix(cand[a], cand[a]);
    }
    for (std::size_t a = 0; a < cand.size(); ++a)
      if (std::abs(W[a]) >= rep.detection_threshold * std::pow(taud, total(a))) kept.push_back(cand[a]);
    if (kept.size() > cap)
      throw BudgetExceeded("live set of " + std::to_string(kept.size()) + " exceeds 4k = " + std::to_string(cap) +
                           " after generator " + std::to_string(i + 1));
    std::sort(kept.begin(), kept.end());
    live = std::move(kept);
    rep.live_sizes.push_back(live.size());
  }

  double coef_precision = cfg.epsilon / (4.0 * std::sqrt(static_cast<double>(cfg.k)));
  double prune = cfg.epsilon / (2.0 * std::sqrt(static_cast<double>(cfg.k)));
  std::vector<std::pair<MultiIndex, double>> terms;
  for (const auto& v : live) {
    double s = cfg.mhat_f > 0.0 ? cfg.mhat_f : detail::prefix_sup(basis, v);
    if (!std::isfinite(s)) throw InvalidArgument("mhat_f is required for unbounded marginals");
    double ans = oracle_f.csq_query(
        [&](const Point& x) { return std::clamp(detail::prefix_eval(basis, v, x) / s, -1.0, 1.0); },
        coef_precision / s);
    double a = ans * s;
    if (std::abs(a) >= prune) terms.emplace_back(MultiIndex(v), a);
  }
  rep.poly = make_sparse(basis, terms);
  rep.queries = oracle_f.ledger().count + oracle_fsq.ledger().count;
  return rep;
}

// Projects onto every multi-index of total degree <= d: C(r+d, d) queries.
inline LearnReport csq_enumeration_learn(SQOracle& oracle_f, const ProductBasis& basis, int d, double epsilon,
                                         double mhat_f = 0.0) {
  if (d < 0 || !(epsilon > 0.0)) throw InvalidArgument("need d >= 0 and epsilon > 0");
  auto all = enumerate_multi_indices(basis.dim(), d);
  double count = static_cast<double>(all.size());
  double precision = epsilon / (4.0 * std::sqrt(count));
  double prune = epsilon / (2.0 * std::sqrt(count));
  long before = oracle_f.ledger().count;
  std::vector<std::pair<MultiIndex, double>> terms;
  for (const auto& v : all) {
    double s = mhat_f > 0.0 ? mhat_f : detail::prefix_sup(basis, v.degrees);
    if (!std::isfinite(s)) throw InvalidArgument("mhat_f is required for unbounded marginals");
    double ans = oracle_f.csq_query(
        [&](const Point& x) { return std::clamp(detail::prefix_eval(basis, v.degrees, x) / s, -1.0, 1.0); },
        precision / s);
    double a = ans * s;
    if (std::abs(a) >= prune) terms.emplace_back(v, a);
  }
  LearnReport rep;
  rep.poly = make_sparse(basis, terms);
  rep.queries = oracle_f.ledger().count - before;
  return rep;
}

// Empirical quantile of max_{|v| <= d} |H_v(g) f(g)^2| over pushforward draws.
inline double mhat_estimate(const std::function<double(const Point&)>& target, const ProductBasis& basis, int d,
                            int k, double quantile, long samples, std::uint64_t seed, const PointSampler& sampler) {
  (void)k;
  if (!(quantile > 0.9 && quantile < 1.0)) throw InvalidArgument("quantile must lie in (0.9, 1)");
  if (samples < 10000) throw InvalidArgument("mhat estimate needs at least 1e4 samples");
  auto idx = enumerate_multi_indices(basis.dim(), d);
  Random rng(seed);
  std::vector<double> vals(samples);
  for (long t = 0; t < samples; ++t) {
    Point g = sampler(rng);
    double f = target(g), f2 = f * f, m = 0.0;
    if (f2 != 0.0)
      for (const auto& v : idx) m = std::max(m, std::abs(detail::prefix_eval(basis, v.degrees, g)));
    vals[t] = m * f2;
  }
  std::size_t pos = std::min(static_cast<std::size_t>(std::ceil(quantile * samples)) - 1, vals.size() - 1);
  std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(pos), vals.end());
  return vals[pos];
}

// Random k-sparse target with distinct nonconstant multi-indices of degree
// <= d and coefficients of magnitude in [0.5, 1.5] with random sign.
inline SparsePoly random_sparse_target(const ProductBasis& basis, int d, int k, std::uint64_t seed) {
  auto all = enumerate_multi_indices(basis.dim(), d, 1);
  if (k > static_cast<int>(all.size())) throw InvalidArgument("k exceeds the number of multi-indices");
  Random rng(seed);
  std::shuffle(all.begin(), all.end(), rng.engine());
  std::vector<std::pair<MultiIndex, double>> terms;
  for (int i = 0; i < k; ++i) terms.emplace_back(all[i], rng.sign() * rng.uniform(0.5, 1.5));
  return make_sparse(basis, terms);
}

// Exact squared L2 distance between two polynomials in the same orthonormal basis.
inline double sparse_distance_sq(const SparsePoly& a, const SparsePoly& b) {
  auto ma = a.as_map(), mb = b.as_map();
  double s = 0.0;
  for (const auto& [v, c] : ma) {
    auto it = mb.find(v);
    double diff = c - (it == mb.end() ? 0.0 : it->second);
    s += diff * diff;
  }
  for (const auto& [v, c] : mb)
    if (!ma.count(v)) s += c * c;
  return s;
}

}  // namespace invlab

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "invlab/common.hpp"
#include "invlab/orthopoly.hpp"

namespace invlab {

using Point = Eigen::VectorXd;
using TargetFn = std::function<double(const Point&)>;
using PointSampler = std::function<Point(Random&)>;
using SqFn = std::function<double(const Point&, double)>;
using CsqFn = std::function<double(const Point&)>;

// A finite weighted point set whose weighted sums are exact expectations
// for the queries it is used with (a finite uniform domain, or a tensor
// quadrature for polynomial queries).
struct ExactMeasure {
  std::vector<Point> points;
  std::vector<double> weights;
};

// Uniform measure on {-1,1}^n.
inline ExactMeasure sign_cube_measure(int n) {
  if (n < 1 || n > 20) throw TooLarge("sign cube limited to n <= 20");
  ExactMeasure m;
  std::uint32_t total = 1u << n;
  for (std::uint32_t x = 0; x < total; ++x) {
    Point p(n);
    for (int i = 0; i < n; ++i) p[i] = (x >> i & 1u) ? -1.0 : 1.0;
    m.points.push_back(std::move(p));
    m.weights.push_back(1.0 / total);
  }
  return m;
}

// Tensor product of one univariate Gauss rule per coordinate.
inline ExactMeasure tensor_gauss_measure(const OrthoFamily& family, int dims, int nodes) {
  if (dims < 1) throw InvalidArgument("dims must be >= 1");
  auto rule = gauss_rule(family, nodes);
  int q = static_cast<int>(rule.nodes.size());
  if (q < nodes) throw InvalidArgument("moments support only a " + std::to_string(q) + "-node rule");
  double total = std::pow(static_cast<double>(q), dims);
  if (total > 5e6) throw TooLarge("tensor quadrature exceeds 5e6 points");
  ExactMeasure m;
  std::vector<int> idx(dims, 0);
  while (true) {
    Point p(dims);
    double w = 1.0;
    for (int i = 0; i < dims; ++i) p[i] = rule.nodes[idx[i]], w *= rule.weights[idx[i]];
    m.points.push_back(std::move(p));
    m.weights.push_back(w);
    int i = 0;
    while (i < dims && ++idx[i] == q) idx[i++] = 0;
    if (i == dims) break;
  }
  return m;
}

struct QueryRecord {
  std::string kind;  // "SQ" or "CSQ"
  double tau = 0.0;
};

struct QueryLedger {
  long count = 0;
  double min_tolerance = std::numeric_limits<double>::infinity();
  std::vector<QueryRecord> log;

  void record(const std::string& kind, double tau) {
    ++count;
    min_tolerance = std::min(min_tolerance, tau);
    log.push_back({kind, tau});
  }

  void write_csv(std::ostream& os) const {
    os << "query,kind,tau\n";
    os.precision(17);
    for (std::size_t i = 0; i < log.size(); ++i) os << i + 1 << ',' << log[i].kind << ',' << log[i].tau << '\n';
  }
};

// Samples that keep a [-1,1]-valued mean within tau with probability
// 1 - delta (Hoeffding for a range of width 2).
inline long hoeffding_samples(double tau, double delta) {
  if (!(tau > 0.0) || !(delta > 0.0 && delta < 1.0)) throw InvalidArgument("need tau > 0 and delta in (0,1)");
  return static_cast<long>(std::ceil(2.0 * std::log(2.0 / delta) / (tau * tau)));
}

enum class OracleMode { ExactAdversarial, Sampled };

inline constexpr double kRangeSlack = 1e-9;
inline constexpr int kRangeProbes = 1000;

class SQOracle {
 public:
  // Exact mode: answers truth + tau * s_q with a seeded sign s_q = +-1, the
  // truth being the weighted sum over the measure.
  static SQOracle exact(TargetFn target, ExactMeasure measure, std::uint64_t seed, PointSampler sampler = {}) {
    if (measure.points.empty() || measure.points.size() != measure.weights.size())
      throw InvalidArgument("exact measure needs matching points and weights");
    SQOracle o(std::move(target), std::move(sampler), OracleMode::ExactAdversarial, seed);
    o.measure_ = std::move(measure);
    o.labels_.reserve(o.measure_.points.size());
    for (const auto& p : o.measure_.points) o.labels_.push_back(o.target_(p));
    return o;
  }

  // Sampled mode: each query averages over fresh draws. samples = 0 picks
  // the Hoeffding count for the requested tau and delta.
  static SQOracle sampled(TargetFn target, PointSampler sampler, long samples, std::uint64_t seed,
                          double delta = 0.01) {
    if (!sampler) throw InvalidArgument("sampled mode needs an input sampler");
    SQOracle o(std::move(target), std::move(sampler), OracleMode::Sampled, seed);
    o.samples_ = samples;
    o.delta_ = delta;
    return o;
  }

  OracleMode mode() const { return mode_; }
  const QueryLedger& ledger() const { return ledger_; }
  bool has_exact() const { return mode_ == OracleMode::ExactAdversarial; }
  long samples_for(double tau) const { return samples_ > 0 ? samples_ : hoeffding_samples(tau, delta_); }

  double sq_query(const SqFn& g, double tau) { return answer(g, tau, "SQ"); }

  double csq_query(const CsqFn& g, double tau) {
    return answer([&](const Point& x, double y) { return g(x) * y; }, tau, "CSQ", &g);
  }

  // Exact expectation of a query, for checking answers. Requires exact mode.
  double truth(const SqFn& g) const {
    if (!has_exact()) throw InvalidArgument("truth needs an exact measure");
    long double s = 0.0L;
    for (std::size_t i = 0; i < measure_.points.size(); ++i)
      s += static_cast<long double>(measure_.weights[i]) * g(measure_.points[i], labels_[i]);
    return static_cast<double>(s);
  }

  // Label-free expectation over the input distribution (no query is
  // charged): exact over the measure, otherwise `samples` fresh draws.
  Eigen::VectorXd input_expectation(const std::function<Eigen::VectorXd(const Point&)>& h, long samples = 100000) {
    if (has_exact()) {
      Eigen::VectorXd s;
      for (std::size_t i = 0; i < measure_.points.size(); ++i) {
        Eigen::VectorXd v = h(measure_.points[i]) * measure_.weights[i];
        if (s.size() == 0) s = v; else s += v;
      }
      return s;
    }
    Random rng(seed_, 0x5eed0000ULL + static_cast<std::uint64_t>(++label_free_calls_));
    Eigen::VectorXd s;
    for (long t = 0; t < samples; ++t) {
      Eigen::VectorXd v = h(sampler_(rng));
      if (s.size() == 0) s = v; else s += v;
    }
    return s / static_cast<double>(samples);
  }

  // Inputs used for range probes and scale estimates.
  std::vector<Point> probe_points(int count = kRangeProbes) {
    std::vector<Point> out;
    if (has_exact()) {
      std::size_t N = measure_.points.size();
      if (N <= static_cast<std::size_t>(count)) return measure_.points;
      for (int i = 0; i < count; ++i) out.push_back(measure_.points[N * i / count]);
      return out;
    }
    Random rng(seed_, 0xb0be0000ULL + static_cast<std::uint64_t>(++probe_calls_));
    for (int i = 0; i < count; ++i) out.push_back(sampler_(rng));
    return out;
  }

  double target(const Point& x) const { return target_(x); }

 private:
  SQOracle(TargetFn target, PointSampler sampler, OracleMode mode, std::uint64_t seed)
      : target_(std::move(target)), sampler_(std::move(sampler)), mode_(mode), seed_(seed) {}

  static void check_range(double v) {
    if (!(std::abs(v) <= 1.0 + kRangeSlack)) throw UnboundedQuery("query value " + std::to_string(v) + " outside [-1,1]");
  }

  double answer(const SqFn& g, double tau, const char* kind, const CsqFn* csq = nullptr) {
    if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
    // Range probes on the query function itself; every evaluated point is
    // checked as well.
    for (const auto& x : probe_points()) check_range(csq ? (*csq)(x) : g(x, target_(x)));
    double value = 0.0;
    std::uint64_t q = static_cast<std::uint64_t>(ledger_.count) + 1;
    if (mode_ == OracleMode::ExactAdversarial) {
      long double s = 0.0L;
      for (std::size_t i = 0; i < measure_.points.size(); ++i) {
        const Point& x = measure_.points[i];
        if (csq) check_range((*csq)(x));
        double v = g(x, labels_[i]);
        if (!csq) check_range(v);
        s += static_cast<long double>(measure_.weights[i]) * v;
      }
      Random sgn(seed_, q);
      value = static_cast<double>(s) + tau * sgn.sign();
    } else {
      long N = samples_for(tau);
      Random rng(seed_, q);
      long double s = 0.0L;
      for (long t = 0; t < N; ++t) {
        Point x = sampler_(rng);
        double y = target_(x);
        if (csq) check_range((*csq)(x));
        double v = g(x, y);
        if (!csq) check_range(v);
        s += v;
      }
      value = static_cast<double>(s / N);
    }
    ledger_.record(kind, tau);
    return value;
  }

  TargetFn target_;
  PointSampler sampler_;
  OracleMode mode_;
  std::uint64_t seed_;
  long samples_ = 0;
  double delta_ = 0.01;
  ExactMeasure measure_;
  std::vector<double> labels_;
  QueryLedger ledger_;
  std::uint64_t probe_calls_ = 0, label_free_calls_ = 0;
};

// ---------------------------------------------------------------------------
// Gradient of the squared loss from correlational queries.

struct DifferentiableModel {
  Eigen::VectorXd params;
  std::function<double(const Point&, const Eigen::VectorXd&)> eval;
  std::function<Eigen::VectorXd(const Point&, const Eigen::VectorXd&)> grad;
};

struct CsqGradient {
  Eigen::VectorXd gradient;
  Eigen::VectorXd scale;  // per-coordinate max |dN/dw_i| used to normalize
};

// grad (1/2) E[(N - y)^2] = E[N grad N] - E[y grad N]. The first term needs
// no labels. Coordinate i of the second is scale_i * CSQ(dN/dw_i / scale_i),
// the query clamped into [-1,1] where inputs exceed the probed maximum.
inline CsqGradient gd_step_via_csq(const DifferentiableModel& model, SQOracle& oracle, double tau) {
  const auto& w = model.params;
  int p = static_cast<int>(w.size());
  Eigen::VectorXd first = oracle.input_expectation([&](const Point& x) { return model.eval(x, w) * model.grad(x, w); });
  CsqGradient out;
  out.scale = Eigen::VectorXd::Zero(p);
  for (const auto& x : oracle.probe_points()) out.scale = out.scale.cwiseMax(model.grad(x, w).cwiseAbs());
  out.gradient.resize(p);
  for (int i = 0; i < p; ++i) {
    double s = out.scale[i];
    if (s == 0.0) {
      out.gradient[i] = first[i];
      continue;
    }
    double c = oracle.csq_query([&](const Point& x) { return std::clamp(model.grad(x, w)[i] / s, -1.0, 1.0); }, tau);
    out.gradient[i] = first[i] - s * c;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Identification of a finite class with SQ queries.

struct Identification {
  int index = 0;
  long queries = 0;
};

inline double class_value(int i, int size) { return -1.0 + (2.0 * i + 1.0) / size; }

// Member i gets value v_i = -1 + (2i+1)/|C|. One query of g(x,y) = v_f for the
// member f with f(x) = y decodes the target when tau < 1/|C|. For larger tau
// (still < 1) the index is read bit by bit, one query per bit.
inline Identification identify_finite_class(const std::vector<TargetFn>& C, SQOracle& oracle, double tau) {
  int K = static_cast<int>(C.size());
  if (K == 0) throw InvalidArgument("empty class");
  if (K == 1) return {0, 0};
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in (0,1)");

  auto probes = oracle.probe_points();
  std::vector<std::vector<double>> vals(K);
  for (int i = 0; i < K; ++i)
    for (const auto& x : probes) vals[i].push_back(C[i](x));
  auto match = [](double a, double b) { return std::abs(a - b) <= 1e-9 * (1.0 + std::abs(b)); };
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < i; ++j) {
      bool same = true;
      for (std::size_t t = 0; t < probes.size() && same; ++t) same = match(vals[i][t], vals[j][t]);
      if (same) throw AmbiguousClass("members " + std::to_string(j) + " and " + std::to_string(i) + " agree on every probe");
    }

  // Average of `score(i)` over members consistent with (x, y).
  auto query = [&](const std::function<double(int)>& score) {
    return [&, score](const Point& x, double y) {
      double s = 0.0;
      int hits = 0;
      for (int i = 0; i < K; ++i)
        if (match(C[i](x), y)) s += score(i), ++hits;
      return hits ? s / hits : 0.0;
    };
  };

  Identification out;
  long before = oracle.ledger().count;
  if (tau < 1.0 / K) {
    double v = oracle.sq_query(query([K](int i) { return class_value(i, K); }), tau);
    int best = static_cast<int>(std::lround((v + 1.0) * K / 2.0 - 0.5));
    out.index = std::clamp(best, 0, K - 1);
  } else {
    int bits = 0;
    while ((1 << bits) < K) ++bits;
    int idx = 0;
    for (int b = 0; b < bits; ++b) {
      double v = oracle.sq_query(query([b](int i) { return (i >> b & 1) ? 1.0 : -1.0; }), tau);
      if (v > 0.0) idx |= 1 << b;
    }
    out.index = std::min(idx, K - 1);
  }
  out.queries = oracle.ledger().count - before;
  return out;
}

}  // namespace invlab

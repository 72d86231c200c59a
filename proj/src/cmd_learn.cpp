#include <fstream>
#include <iomanip>

#include "cli.hpp"
#include "invlab/growing_basis.hpp"
#include "invlab/sq_oracle.hpp"

namespace invlab::cli {

namespace {

struct LearnSetup {
  GeneratorMap map;
  ProductBasis basis;
  ExactMeasure measure;
  SparsePoly target;
  int d = 0, k = 0;
  double epsilon = 0.0;
  double mhat = 0.0, mhat_f = 0.0;  // 0 selects closed-form bounds
};

SparsePoly read_target(const std::string& path, const ProductBasis& basis, int d) {
  std::ifstream is(path);
  if (!is) throw BadConfig("cannot open target " + path);
  json j;
  try {
    j = json::parse(is);
    std::vector<std::pair<MultiIndex, double>> terms;
    for (const auto& t : j.at("terms")) {
      MultiIndex v(t.at("index").get<std::vector<int>>());
      if (v.dim() != basis.dim()) throw BadConfig("target index length differs from r");
      if (v.total() > d) throw BadConfig("target term " + v.str() + " exceeds degree d");
      for (int x : v.degrees)
        if (x < 0) throw BadConfig("negative degree in target");
      terms.emplace_back(v, t.at("coef").get<double>());
    }
    return make_sparse(basis, terms);
  } catch (const json::exception& e) {
    throw BadConfig("target " + path + ": " + e.what());
  }
}

json target_json(const SparsePoly& p) {
  json terms = json::array();
  for (const auto& [v, c] : p.terms) terms.push_back({{"index", v.degrees}, {"coef", c}});
  return {{"terms", terms}};
}

LearnSetup make_setup(RunContext& ctx) {
  auto& p = ctx.params;
  std::string gens = p.get<std::string>("gens", "sign-abs");
  int r = p.get<int>("r", 6);
  LearnSetup s;
  s.d = p.get<int>("d", 3);
  s.k = p.get<int>("k", 3);
  s.epsilon = p.get<double>("epsilon", 1e-3);
  std::string target = p.get<std::string>("target", "");
  if (r < 1 || s.d < 0 || s.k < 1) throw BadConfig("need r >= 1, d >= 0, k >= 1");
  int nodes = 2 * s.d + 1;  // exact for the degree-4d products the learner queries
  if (gens == "sign-abs") {
    s.map = GeneratorMap::sign_abs(r);
    s.basis = s.map.basis(2 * s.d);
    s.measure = tensor_gauss_measure(legendre_family(2 * s.d, true), r, nodes);
  } else if (gens == "row-norms") {
    int cols = p.get<int>("cols", 3);
    s.map = GeneratorMap::row_norms(r, cols);
    s.basis = s.map.basis(2 * s.d);
    OrthoFamily law;
    law.marginal = Marginal::Custom;
    law.moments = GeneratorMap::chi_squared_moments(cols, 2 * nodes);
    s.measure = tensor_gauss_measure(law, r, nodes);
  } else {
    throw BadConfig("gens must be sign-abs or row-norms");
  }
  s.target = target.empty() ? random_sparse_target(s.basis, s.d, s.k, ctx.seed) : read_target(target, s.basis, s.d);
  if (!std::isfinite(sparse_sup_bound(s.target))) {
    // Unbounded marginals: the exact measure is finite, so its support gives the bounds.
    auto idx = enumerate_multi_indices(r, s.d);
    for (const auto& g : s.measure.points) {
      double f = eval_sparse(s.target, g), f2 = f * f;
      for (const auto& v : idx) {
        std::vector<int> v2(v.degrees);
        for (int& x : v2) x *= 2;
        s.mhat = std::max(s.mhat, std::abs(detail::prefix_eval(s.basis, v2, g)) * f2);
        s.mhat_f = std::max(s.mhat_f, std::abs(detail::prefix_eval(s.basis, v.degrees, g)));
      }
    }
    s.mhat = std::max(s.mhat, 1.0);
  } else {
    s.mhat = std::max(1.0, mhat_from_label_bound(s.basis, s.d, sparse_sup_bound(s.target)));
  }
  ctx.out.write_json("target.json", target_json(s.target));
  return s;
}

void write_ledgers(Outputs& out, const std::vector<std::pair<std::string, const QueryLedger*>>& ledgers) {
  out.write("ledger.csv", [&](std::ostream& os) {
    os << std::setprecision(17) << "oracle,query,kind,tau\n";
    for (const auto& [name, l] : ledgers)
      for (std::size_t i = 0; i < l->log.size(); ++i)
        os << name << ',' << i + 1 << ',' << l->log[i].kind << ',' << l->log[i].tau << '\n';
  });
}

json report_json(const LearnSetup& s, const LearnReport& rep, double error) {
  return {{"recovered", target_json(rep.poly)["terms"]},
          {"support_exact", rep.poly.support() == s.target.support()},
          {"coef_error", error},
          {"queries", rep.queries},
          {"enumeration_count", binom_u64(s.basis.dim() + s.d, s.d)},
          {"live_sizes", rep.live_sizes},
          {"detection_threshold", rep.detection_threshold},
          {"detection_tolerance", rep.detection_tolerance}};
}

TargetFn as_target(const SparsePoly& p, bool squared) {
  return [&p, squared](const Point& x) {
    double v = eval_sparse(p, x);
    return squared ? v * v : v;
  };
}

json growing_basis_cmd(RunContext& ctx) {
  LearnSetup s = make_setup(ctx);
  double threshold = ctx.params.get<double>("threshold", 0.0);
  auto of = SQOracle::exact(as_target(s.target, false), s.measure, ctx.seed + 1);
  auto ofsq = SQOracle::exact(as_target(s.target, true), s.measure, ctx.seed + 2);
  LearnerConfig cfg;
  cfg.d = s.d;
  cfg.k = s.k;
  cfg.epsilon = s.epsilon;
  cfg.detection_threshold = threshold;
  cfg.mhat = s.mhat;
  cfg.mhat_f = s.mhat_f;
  auto rep = growing_basis_learn(of, ofsq, s.basis, cfg);
  double err = std::sqrt(sparse_distance_sq(rep.poly, s.target));
  write_ledgers(ctx.out, {{"f", &of.ledger()}, {"f_squared", &ofsq.ledger()}});
  json j = report_json(s, rep, err);
  ctx.out.write_json("report.json", j);
  if (!(err <= s.epsilon)) ctx.fail("coefficient error " + std::to_string(err) + " exceeds epsilon");
  return j;
}

json csq_baseline_cmd(RunContext& ctx) {
  LearnSetup s = make_setup(ctx);
  auto of = SQOracle::exact(as_target(s.target, false), s.measure, ctx.seed + 1);
  auto rep = csq_enumeration_learn(of, s.basis, s.d, s.epsilon, s.mhat_f);
  double err = std::sqrt(sparse_distance_sq(rep.poly, s.target));
  write_ledgers(ctx.out, {{"f", &of.ledger()}});
  json j = report_json(s, rep, err);
  ctx.out.write_json("report.json", j);
  if (!(err <= s.epsilon)) ctx.fail("coefficient error " + std::to_string(err) + " exceeds epsilon");
  return j;
}

// chi_S(x) on {-1,1}^n for the subset with bit mask S.
double character(std::uint32_t S, const Point& x) {
  double v = 1.0;
  for (int i = 0; i < x.size(); ++i)
    if (S >> i & 1u) v *= x[i];
  return v;
}

json sq_demo_cmd(RunContext& ctx) {
  auto& p = ctx.params;
  int n = p.get<int>("n", 4);
  double tau = p.get<double>("tau", 0.1);
  int trials = p.get<int>("trials", 1000);
  double delta = p.get<double>("delta", 0.01);
  int class_size = p.get<int>("class_size", 4);
  if (n < 2 || n > 16) throw BadConfig("n must lie in 2..16");
  if (class_size < 1) throw BadConfig("class-size must be >= 1");

  // Target: the parity of the first two bits.
  TargetFn f = [](const Point& x) { return x[0] * x[1]; };
  PointSampler cube = [n](Random& rng) {
    Point x(n);
    for (int i = 0; i < n; ++i) x[i] = rng.sign();
    return x;
  };
  auto exact = SQOracle::exact(f, sign_cube_measure(n), ctx.seed + 1, cube);
  auto sampled = SQOracle::sampled(f, cube, 0, ctx.seed + 2, delta);
  Random rng(ctx.seed, 3);
  int exact_out = 0, sampled_out = 0;
  ctx.out.write("answers.csv", [&](std::ostream& os) {
    os << std::setprecision(17) << "mode,query,subset,truth,answer,abs_error,within_tau\n";
    for (int t = 0; t < trials; ++t) {
      auto S = static_cast<std::uint32_t>(rng.integer(0, (1 << n) - 1));
      SqFn g = [S](const Point& x, double y) { return y * character(S, x); };
      double truth = exact.truth(g);
      for (int m = 0; m < 2; ++m) {
        auto& o = m == 0 ? exact : sampled;
        double a = o.sq_query(g, tau), e = std::abs(a - truth);
        bool within = e <= tau + 1e-12;
        if (!within) ++(m == 0 ? exact_out : sampled_out);
        os << (m == 0 ? "exact" : "sampled") << ',' << t << ',' << S << ',' << truth << ',' << a << ',' << e << ','
           << within << '\n';
      }
    }
  });
  double freq = static_cast<double>(sampled_out) / trials;
  if (exact_out) ctx.fail(std::to_string(exact_out) + " exact answers outside the tolerance band");
  if (freq > delta) ctx.fail("sampled band violation frequency " + std::to_string(freq) + " exceeds delta");

  // Identification among (i+1) x0 x1, which pairwise differ at every cube point.
  std::vector<TargetFn> C;
  for (int i = 0; i < class_size; ++i) C.push_back([i](const Point& x) { return (i + 1.0) * x[0] * x[1]; });
  int truth_index = static_cast<int>(ctx.seed % static_cast<std::uint64_t>(class_size));
  auto id_oracle = SQOracle::exact(C[truth_index], sign_cube_measure(n), ctx.seed + 4, cube);
  auto id = identify_finite_class(C, id_oracle, tau);
  if (id.index != truth_index) ctx.fail("identification returned the wrong member");
  write_ledgers(ctx.out, {{"exact", &exact.ledger()}, {"sampled", &sampled.ledger()}, {"identify", &id_oracle.ledger()}});
  return {{"exact_outside_band", exact_out},
          {"sampled_violation_frequency", freq},
          {"sampled_samples_per_query", sampled.samples_for(tau)},
          {"identified", id.index},
          {"true_index", truth_index},
          {"identification_queries", id.queries}};
}

std::vector<Flag> learner_flags() {
  return {{"gens", FlagKind::Text, "sign-abs | row-norms (default sign-abs)"},
          {"r", FlagKind::Int, "Number of generators (default 6)"},
          {"d", FlagKind::Int, "Degree bound (default 3)"},
          {"k", FlagKind::Int, "Sparsity of the random target (default 3)"},
          {"cols", FlagKind::Int, "Columns per row for row-norms (default 3)"},
          {"epsilon", FlagKind::Real, "Target L2 accuracy (default 1e-3)"},
          {"target", FlagKind::Text, "JSON target {\"terms\":[{\"index\":[...],\"coef\":c}]}; random when absent"}};
}

}  // namespace

std::vector<Subcommand> learn_subcommands() {
  auto gb_flags = learner_flags();
  gb_flags.push_back({"threshold", FlagKind::Real, "Detection threshold; 0 selects the default"});
  return {
      {"growing-basis", "Learn a sparse polynomial of generator outputs with the growing-basis SQ learner", gb_flags,
       growing_basis_cmd},
      {"csq-baseline", "Learn the same target by projecting onto every multi-index of degree <= d", learner_flags(),
       csq_baseline_cmd},
      {"sq-demo",
       "Exact and sampled SQ oracles on the sign cube, and identification of a finite class",
       {{"n", FlagKind::Int, "Cube dimension (default 4)"},
        {"tau", FlagKind::Real, "Query tolerance (default 0.1)"},
        {"trials", FlagKind::Int, "Queries per oracle (default 1000)"},
        {"delta", FlagKind::Real, "Failure probability for the sampled mode (default 0.01)"},
        {"class-size", FlagKind::Int, "Members of the class to identify (default 4)"}},
       sq_demo_cmd},
  };
}

}  // namespace invlab::cli

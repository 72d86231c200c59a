#include <iomanip>

#include "cli.hpp"
#include "invlab/hard_families.hpp"

namespace invlab::cli {

namespace {

std::vector<double> flatten(const Eigen::MatrixXd& X) {
  std::vector<double> v;
  v.reserve(X.size());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) v.push_back(X(i, j));
  return v;
}

json matrix_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(r);
  }
  return rows;
}

void write_gram(Outputs& out, const std::string& name, const CorrelationResult& r) {
  out.write(name, [&](std::ostream& os) {
    os << std::setprecision(17) << "i,j,estimate,stderr\n";
    for (Eigen::Index i = 0; i < r.gram.rows(); ++i)
      for (Eigen::Index j = i; j < r.gram.cols(); ++j)
        os << i << ',' << j << ',' << r.gram(i, j) << ',' << r.stderr_(i, j) << '\n';
  });
}

// Labeled rows X -> f(X) for Gaussian X (n x d).
void write_gaussian_dataset(RunContext& ctx, int n, int d, long rows, const MatrixFn& f) {
  Random rng(ctx.seed, 2);
  std::vector<std::vector<double>> inputs;
  std::vector<double> labels;
  for (long t = 0; t < rows; ++t) {
    Eigen::MatrixXd X = detail::gaussian_matrix(rng, n, d);
    labels.push_back(f(X));
    inputs.push_back(flatten(X));
  }
  ctx.out.write("dataset.csv", [&](std::ostream& os) { write_labeled_csv(os, inputs, labels); });
}

json degree_parity(RunContext& ctx) {
  auto& p = ctx.params;
  int n = p.get<int>("n", 15);
  long rows = p.get<long>("samples", 1000);
  int size = p.get<int>("subset_size", -1);
  Random rng(ctx.seed, 1);
  if (size < 0) size = rng.integer(0, n + 1);
  if (size > n + 1) throw BadConfig("subset-size must be <= n + 1");
  DegreeCountParity f = random_degree_count_parity(rng, n, size);
  auto gnn = realize_gSb_as_gnn(f);
  std::vector<std::vector<double>> inputs;
  std::vector<double> labels;
  long mismatches = 0;
  for (long t = 0; t < rows; ++t) {
    Adjacency A = random_adjacency(rng, n);
    int y = eval_gSb(f, A);
    if (std::lround(gnn.eval(A)) != y || std::abs(gnn.eval(A) - y) > 1e-9) ++mismatches;
    labels.push_back(y);
    inputs.push_back(flatten(A.cast<double>()));
  }
  ctx.out.write("dataset.csv", [&](std::ostream& os) { write_labeled_csv(os, inputs, labels); });
  ctx.out.write_json("member.json", {{"family", "degree-parity"}, {"n", n}, {"S", f.S}, {"b", f.b}});
  if (mismatches) ctx.fail(std::to_string(mismatches) + " graphs where the realized GNN differs from g_{S,b}");
  double mean = 0.0;
  for (double y : labels) mean += y / static_cast<double>(rows);
  return {{"S", f.S}, {"b", f.b}, {"gnn_mismatches", mismatches}, {"label_mean", mean}};
}

json ridge(RunContext& ctx) {
  auto& p = ctx.params;
  int n = p.get<int>("n", 4), d = p.get<int>("d", 2), k = p.get<int>("k", 3);
  Activation act = parse_activation(p.get<std::string>("activation", "sigmoid"));
  int members = p.get<int>("members", 1);
  double threshold = p.get<double>("threshold", 0.3);
  long rows = p.get<long>("samples", 1000);
  long mc = p.get<long>("mc", 0);
  long norm_samples = p.get<long>("norm_samples", 100000);
  bool projections = p.get<bool>("projections", false);

  Random rng(ctx.seed, 1);
  Adjacency A = random_graph(rng, n);
  auto shift = normalize_shift(A);
  auto bset = sample_near_orthogonal_set(d, members, threshold, nullptr, ctx.seed + 1);
  double norm = ridge_norm(shift.matrix, k, act, norm_samples, ctx.seed + 2).estimate;
  std::vector<RidgeFamilyMember> fam;
  for (const auto& B : bset.matrices) fam.push_back(make_ridge_member(shift.matrix, B, k, act, norm));
  ctx.out.write("graph.txt", [&](std::ostream& os) { write_edge_list(os, A); });
  json mj = json::array();
  for (const auto& B : bset.matrices) mj.push_back(matrix_json(B));
  ctx.out.write_json("member.json", {{"family", "ridge"}, {"k", k}, {"activation", activation_name(act)},
                                     {"norm", norm}, {"B", mj}});
  write_gaussian_dataset(ctx, n, d, rows, [&](const Eigen::MatrixXd& X) { return fam[0](X); });

  json summary = {{"norm", norm}, {"members", fam.size()}, {"max_overlap", bset_max_overlap(bset.matrices)}};
  if (projections) {
    MatrixFn f = [&](const Eigen::MatrixXd& X) { return fam[0](X); };
    double worst = 0.0;
    ctx.out.write("projections.csv", [&](std::ostream& os) {
      os << std::setprecision(17) << "J,estimate,stderr\n";
      std::uint64_t stream = 10;
      for (const auto& J : enumerate_multi_indices(d, k - 1)) {
        auto e = hermite_projection(f, shift, J, std::max(mc, 2L), ctx.seed + stream++);
        worst = std::max(worst, std::abs(e.estimate));
        os << '"' << J.str() << "\"," << e.estimate << ',' << e.stderr_ << '\n';
      }
    });
    summary["max_low_degree_projection"] = worst;
  }
  if (mc > 0 && fam.size() >= 2) {
    std::vector<MatrixFn> fns;
    for (const auto& m : fam) fns.push_back([&m](const Eigen::MatrixXd& X) { return m(X); });
    auto r = correlation_matrix(fns, gaussian_sampler(n, d), mc, ctx.seed + 3);
    write_gram(ctx.out, "correlation.csv", r);
    summary["max_off_diagonal"] = r.max_off_diagonal();
    summary["overlap_bound"] = std::pow(threshold, k);
  }
  return summary;
}

PermGroup named_group(const std::string& g, int n) {
  if (g == "cyclic") return cyclic_group(n);
  if (g == "symmetric") return enumerate_group(symmetric_generators(n));
  if (g == "trivial") return enumerate_group({Permutation::identity(n)});
  throw BadConfig("group must be cyclic, symmetric or trivial");
}

json frame_ridge(RunContext& ctx) {
  auto& p = ctx.params;
  int n = p.get<int>("n", 50), d = p.get<int>("d", 1), k = p.get<int>("k", 10);
  Activation act = parse_activation(p.get<std::string>("activation", "relu"));
  int members = p.get<int>("members", 1);
  double threshold = p.get<double>("threshold", 0.3);
  long rows = p.get<long>("samples", 1000);
  long mc = p.get<long>("mc", 0);
  std::string gname = p.get<std::string>("group", "cyclic");
  bool normalize = p.get<bool>("normalize", false);
  long norm_samples = p.get<long>("norm_samples", 100000);

  PermGroup G = named_group(gname, n);
  auto bset = sample_near_orthogonal_set(n, members, threshold, &G, ctx.seed + 1);
  double star = normalize ? ridge_star_norm(k, d, act, norm_samples, ctx.seed + 2).estimate : 1.0;
  std::vector<FrameAveragedRidge> fam;
  for (const auto& B : bset.matrices) fam.emplace_back(k, B, G, act, star);
  json mj = json::array();
  for (const auto& B : bset.matrices) mj.push_back(matrix_json(B));
  ctx.out.write_json("member.json", {{"family", "frame-ridge"}, {"group", gname}, {"group_order", G.order()},
                                     {"k", k}, {"activation", activation_name(act)}, {"star_norm", star}, {"B", mj}});
  write_gaussian_dataset(ctx, n, d, rows, [&](const Eigen::MatrixXd& X) { return fam[0](X); });
  json summary = {{"group_order", G.order()}, {"members", fam.size()}, {"star_norm", star}};
  if (mc > 0 && fam.size() >= 2) {
    std::vector<MatrixFn> fns;
    for (const auto& m : fam) fns.push_back([&m](const Eigen::MatrixXd& X) { return m(X); });
    auto r = correlation_matrix(fns, gaussian_sampler(n, d), mc, ctx.seed + 3);
    write_gram(ctx.out, "correlation.csv", r);
    summary["max_off_diagonal"] = r.max_off_diagonal();
  }
  return summary;
}

json goel(RunContext& ctx) {
  auto& p = ctx.params;
  int n = p.get<int>("n", 8), d = p.get<int>("d", 1), m = p.get<int>("m", 2);
  Activation act = parse_activation(p.get<std::string>("activation", "relu"));
  std::string frame = p.get<std::string>("frame", "reynolds-cyclic");
  bool averaged = p.get<bool>("averaged", false);
  int members = p.get<int>("members", 1);
  long rows = p.get<long>("samples", 1000);
  long mc = p.get<long>("mc", 0);
  double floor = p.get<double>("floor", 0.0);

  Frame F = frame == "abs-lex-sort" ? Frame::abs_lex_sort()
            : frame == "reynolds-cyclic"
                ? Frame::reynolds(cyclic_group(n))
                : throw BadConfig("frame must be reynolds-cyclic or abs-lex-sort");
  // One member per cyclic orbit of m-subsets, represented by its first subset.
  auto orbits = subset_orbits(cyclic_group(n), m);
  if (members > static_cast<int>(orbits.size()))
    throw BadConfig("only " + std::to_string(orbits.size()) + " subset orbits exist");
  std::vector<GoelParityMember> fam;
  json sets = json::array();
  for (int i = 0; i < members; ++i) {
    fam.push_back(make_goel_member(n, d, orbits[i][0], F, act));
    sets.push_back(orbits[i][0]);
  }
  ctx.out.write_json("member.json", {{"family", "goel"}, {"frame", frame}, {"averaged", averaged}, {"S", sets}});
  write_gaussian_dataset(ctx, n, d, rows, [&](const Eigen::MatrixXd& X) { return eval_goel(fam[0], X, averaged); });
  std::vector<MatrixFn> fns;
  for (const auto& g : fam) fns.push_back([&g, averaged](const Eigen::MatrixXd& X) { return eval_goel(g, X, averaged); });
  json summary = {{"members", fam.size()}, {"orbits", orbits.size()}};
  if (mc > 0 && fam.size() >= 2) {
    auto r = correlation_matrix(fns, gaussian_sampler(n, d), mc, ctx.seed + 3);
    write_gram(ctx.out, "correlation.csv", r);
    summary["max_off_diagonal"] = r.max_off_diagonal();
  }
  if (floor > 0.0) {
    auto c = norm_census(fns, gaussian_sampler(n, d), floor, std::max(mc, 10000L), ctx.seed + 4);
    ctx.out.write("norms.csv", [&](std::ostream& os) {
      os << std::setprecision(17) << "member,norm_sq,stderr\n";
      for (std::size_t i = 0; i < c.norm_sq.size(); ++i) os << i << ',' << c.norm_sq[i] << ',' << c.stderr_[i] << '\n';
    });
    summary["norm_census_fraction"] = c.fraction;
  }
  return summary;
}

json hard_family_cmd(RunContext& ctx) {
  std::string fam = ctx.params.get<std::string>("family", "degree-parity");
  if (fam == "degree-parity") return degree_parity(ctx);
  if (fam == "ridge") return ridge(ctx);
  if (fam == "frame-ridge") return frame_ridge(ctx);
  if (fam == "goel") return goel(ctx);
  throw BadConfig("family must be degree-parity, ridge, frame-ridge or goel");
}

}  // namespace

std::vector<Subcommand> hard_subcommands() {
  return {{"hard-family",
           "Sample a hard invariant function family, export a labeled dataset and run its checks",
           {{"family", FlagKind::Text, "degree-parity | ridge | frame-ridge | goel (default degree-parity)"},
            {"n", FlagKind::Int, "Nodes or rows of the input"},
            {"d", FlagKind::Int, "Feature columns"},
            {"k", FlagKind::Int, "Ridge frequency"},
            {"m", FlagKind::Int, "Parity width for goel"},
            {"subset-size", FlagKind::Int, "|S| for degree-parity; -1 draws it (default -1)"},
            {"activation", FlagKind::Text, "relu | sigmoid | identity"},
            {"members", FlagKind::Int, "Family members to draw (default 1)"},
            {"threshold", FlagKind::Real, "Pairwise overlap bound for the frame set (default 0.3)"},
            {"group", FlagKind::Text, "cyclic | symmetric | trivial for frame-ridge (default cyclic)"},
            {"normalize", FlagKind::Switch, "Divide frame-ridge by the MC norm of the plain ridge"},
            {"frame", FlagKind::Text, "reynolds-cyclic | abs-lex-sort for goel"},
            {"averaged", FlagKind::Switch, "Frame-average the goel members"},
            {"samples", FlagKind::Int, "Dataset rows (default 1000)"},
            {"mc", FlagKind::Int, "MC samples for correlations and projections; 0 skips (default 0)"},
            {"norm-samples", FlagKind::Int, "MC samples for the norm estimate (default 1e5)"},
            {"projections", FlagKind::Switch, "Project the ridge onto invariant Hermite polynomials of degree < k"},
            {"floor", FlagKind::Real, "Norm-census floor for goel; 0 skips"}},
           hard_family_cmd}};
}

}  // namespace invlab::cli

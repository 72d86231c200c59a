#include <fstream>
#include <iomanip>

#include "cli.hpp"
#include "invlab/invariant_hermite.hpp"
#include "invlab/orthopoly.hpp"

namespace invlab::cli {

namespace {

double max_dev_from_identity(const Eigen::MatrixXd& G) {
  return (G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
}

std::vector<std::pair<std::string, OrthoFamily>> families(const std::string& which, int D, int custom_degree) {
  std::vector<std::pair<std::string, OrthoFamily>> out;
  auto want = [&](const char* name) { return which == "all" || which == name; };
  if (want("hermite")) out.emplace_back("hermite", hermite_family(D));
  if (want("legendre")) out.emplace_back("legendre", legendre_family(D, false));
  if (want("shifted-legendre")) out.emplace_back("shifted-legendre", legendre_family(D, true));
  if (want("chi2-3")) {
    // Raw moments of chi-squared with 3 degrees of freedom: prod_{i<j} (3 + 2i),
    // through m_{2D+2} so the Gauss rule has D+1 nodes. The moment Hankel
    // matrix is too ill-conditioned past degree ~7.
    std::vector<double> m(2 * custom_degree + 3, 1.0);
    for (int j = 1; j <= 2 * custom_degree + 2; ++j) m[j] = m[j - 1] * (3.0 + 2.0 * (j - 1));
    out.emplace_back("chi2-3", gram_schmidt_from_moments(m, custom_degree));
  }
  if (out.empty()) throw BadConfig("family must be all, hermite, legendre, shifted-legendre or chi2-3");
  return out;
}

Adjacency load_graph(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw BadConfig("cannot open graph " + path);
  bool csv = path.size() >= 4 && path.substr(path.size() - 4) == ".csv";
  return csv ? read_dense_csv(is) : read_edge_list(is);
}

json verify_hermite_cmd(RunContext& ctx) {
  auto& p = ctx.params;
  std::string which = p.get<std::string>("family", "all");
  int D = p.get<int>("max_degree", 16);
  double tol = p.get<double>("tol", 1e-10);
  int gs_degree = p.get<int>("gs_degree", 3);
  int custom_degree = p.get<int>("custom_degree", 6);
  std::string graph = p.get<std::string>("graph", "");
  int n = p.get<int>("n", 4);
  int d = p.get<int>("d", 2);
  int max_order = p.get<int>("max_order", 3);
  long samples = p.get<long>("samples", 1000000);
  double sigmas = p.get<double>("sigmas", 4.0);
  auto rhos = p.get<std::vector<double>>("mehler_rhos", {0.25, 0.5});
  int mehler_max = p.get<int>("mehler_max", 3);

  json summary = json::object();
  // Orthonormality under each family's own Gauss rule.
  auto fams = families(which, D, custom_degree);
  double worst = 0.0;
  ctx.out.write("orthonormality.csv", [&](std::ostream& os) {
    os << std::setprecision(17) << "family,max_degree,max_deviation\n";
    for (const auto& [name, f] : fams) {
      double dev = max_dev_from_identity(quadrature_gram(f));
      worst = std::max(worst, dev);
      os << name << ',' << f.max_degree << ',' << dev << '\n';
      if (!(dev < tol)) ctx.fail(name + " quadrature Gram deviates by " + std::to_string(dev));
    }
  });
  summary["orthonormality_max_deviation"] = worst;

  // Gram-Schmidt on uniform[0,1] moments against the shifted Legendre table.
  auto gs = gram_schmidt_from_moments(marginal_moments(Marginal::ShiftedUniform, 2 * gs_degree), gs_degree);
  auto ref = legendre_family(gs_degree, true);
  double gs_dev = 0.0;
  for (int t = 0; t <= gs_degree; ++t)
    for (int k = 0; k <= t; ++k) gs_dev = std::max(gs_dev, std::abs(gs.coeffs[t][k] - ref.coeffs[t][k]));
  if (!(gs_dev < tol)) ctx.fail("Gram-Schmidt differs from shifted Legendre by " + std::to_string(gs_dev));
  summary["gram_schmidt_max_deviation"] = gs_dev;

  if (samples > 0 && (n > 0 || !graph.empty())) {
    Adjacency A;
    if (!graph.empty()) {
      A = load_graph(graph);
    } else {
      Random rng(ctx.seed, 1);
      A = random_graph(rng, n);
    }
    auto s = normalize_shift(A);
    ctx.out.write("graph.txt", [&](std::ostream& os) { write_edge_list(os, A); });
    auto Js = enumerate_multi_indices(d, max_order);
    auto g = mc_gram_HJA(s, Js, samples, ctx.seed);
    int bad = 0;
    double worst_z = 0.0;
    ctx.out.write("hermite_gram.csv", [&](std::ostream& os) {
      os << std::setprecision(17) << "J,K,estimate,stderr,expected,abs_dev_over_stderr\n";
      for (std::size_t i = 0; i < Js.size(); ++i)
        for (std::size_t j = i; j < Js.size(); ++j) {
          double want = i == j ? c_J(s, Js[i].total()) : 0.0;
          double dev = std::abs(g.estimate(i, j) - want), se = g.stderr_(i, j);
          double z = se > 0.0 ? dev / se : (dev == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
          worst_z = std::max(worst_z, z);
          if (dev > sigmas * se) ++bad;
          os << '"' << Js[i].str() << "\",\"" << Js[j].str() << "\"," << g.estimate(i, j) << ',' << se << ','
             << want << ',' << z << '\n';
        }
    });
    if (bad) ctx.fail(std::to_string(bad) + " invariant Hermite pairs outside the stderr band");
    summary["hermite_pairs"] = Js.size() * (Js.size() + 1) / 2;
    summary["hermite_outside_band"] = bad;
    summary["hermite_max_z"] = worst_z;

    int mbad = 0;
    ctx.out.write("mehler.csv", [&](std::ostream& os) {
      os << std::setprecision(17) << "rho,i,j,estimate,stderr,expected\n";
      std::uint64_t stream = 0;
      for (double rho : rhos)
        for (int i = 0; i <= mehler_max; ++i)
          for (int j = 0; j <= mehler_max; ++j) {
            auto e = mc_mehler(rho, i, j, samples, ctx.seed + 1000 + stream++);
            double want = i == j ? std::pow(rho, i) : 0.0;
            if (std::abs(e.estimate - want) > sigmas * e.stderr_) ++mbad;
            os << rho << ',' << i << ',' << j << ',' << e.estimate << ',' << e.stderr_ << ',' << want << '\n';
          }
    });
    if (mbad) ctx.fail(std::to_string(mbad) + " Mehler entries outside the stderr band");
    summary["mehler_outside_band"] = mbad;
  }
  return summary;
}

}  // namespace

std::vector<Subcommand> hermite_subcommands() {
  return {{"verify-hermite",
           "Orthonormality of the polynomial families and MC orthogonality of invariant Hermite polynomials",
           {{"family", FlagKind::Text, "all | hermite | legendre | shifted-legendre | chi2-3 (default all)"},
            {"max-degree", FlagKind::Int, "Highest degree in the quadrature check (default 16)"},
            {"tol", FlagKind::Real, "Allowed deviation from the identity Gram (default 1e-10)"},
            {"custom-degree", FlagKind::Int, "Degree of the moment-defined chi2-3 family (default 6)"},
            {"gs-degree", FlagKind::Int, "Degree of the Gram-Schmidt versus shifted Legendre check (default 3)"},
            {"graph", FlagKind::Text, "Edge list, or dense .csv adjacency, for the MC grid"},
            {"n", FlagKind::Int, "Nodes of a random graph when --graph is absent; 0 skips MC (default 4)"},
            {"d", FlagKind::Int, "Feature columns (default 2)"},
            {"max-order", FlagKind::Int, "Largest total degree |J| (default 3)"},
            {"samples", FlagKind::Int, "MC samples; 0 skips MC (default 1e6)"},
            {"sigmas", FlagKind::Real, "Band width in standard errors (default 4)"},
            {"mehler-rhos", FlagKind::RealList, "Correlations for the Mehler check (default 0.25,0.5)"},
            {"mehler-max", FlagKind::Int, "Largest Hermite degree in the Mehler check (default 3)"}},
           verify_hermite_cmd}};
}

}  // namespace invlab::cli

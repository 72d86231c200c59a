#include <fstream>
#include <iomanip>

#include "cli.hpp"
#include "invlab/np_reduction.hpp"

namespace invlab::cli {

namespace {

// Margins closer to zero than this are ties that rounding may flip.
constexpr double kTieBand = 1e-9;

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

CliqueGNN read_gnn(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw BadConfig("cannot open network " + path);
  try {
    json j = json::parse(is);
    CliqueGNN g;
    g.a = to_vector(j.at("a").get<std::vector<double>>());
    g.b = to_vector(j.at("b").get<std::vector<double>>());
    g.c = j.at("c").get<double>();
    g.k = static_cast<int>(g.a.size());
    return g;
  } catch (const json::exception& e) {
    throw BadConfig("network " + path + ": " + e.what());
  }
}

json gnn_json(const CliqueGNN& g) { return {{"k", g.k}, {"a", to_std(g.a)}, {"b", to_std(g.b)}, {"c", g.c}}; }

std::vector<std::vector<int>> choose_points(int n, long count, Random& rng) {
  if (count <= 0) return all_points(n);
  std::vector<std::vector<int>> pts(count, std::vector<int>(n));
  for (auto& p : pts)
    for (int& b : p) b = rng.bit();
  return pts;
}

struct Comparison {
  long compared = 0, disagreements = 0, ties = 0;
  double max_abs_diff = 0.0;
};

// Compares the network on each reduced graph with the halfspace margin.
Comparison compare(const CliqueGNN& g, const Halfspace& h, const std::vector<std::vector<int>>& pts,
                   std::vector<double>& gnn_out) {
  Comparison c;
  int n = static_cast<int>(h.v.size());
  Eigen::VectorXd x = Eigen::VectorXd::Constant(reduced_node_count(n), -1.0);
  for (const auto& p : pts) {
    double out = eval_clique_gnn(g, x, reduce_point(p)), m = halfspace_margin(h, p);
    gnn_out.push_back(out);
    c.max_abs_diff = std::max(c.max_abs_diff, std::abs(out - m));
    ++c.compared;
    if (std::abs(m) <= kTieBand) {
      ++c.ties;
      continue;
    }
    if (sign_label(out) != sign_label(m)) ++c.disagreements;
  }
  return c;
}

json np_reduce_cmd(RunContext& ctx) {
  auto& p = ctx.params;
  std::string direction = p.get<std::string>("direction", "to-gnn");
  std::string input = p.get<std::string>("input", "");
  int n = p.get<int>("n", 6);
  long count = p.get<long>("points", 0);
  bool graphs = p.get<bool>("write_graphs", false);
  Random rng(ctx.seed, 1);

  HalfspaceDataset ds;
  Halfspace h;
  CliqueGNN g;
  bool have_labels = false;
  if (!input.empty()) {
    std::ifstream is(input);
    if (!is) throw BadConfig("cannot open " + input);
    ds = read_halfspace_csv(is);
    n = ds.n;
    have_labels = true;
  } else {
    if (n < 1 || (count <= 0 && n > 16)) throw BadConfig("exhaustive mode needs 1 <= n <= 16; pass --points");
    ds.n = n;
    ds.points = choose_points(n, count, rng);
  }

  if (direction == "to-gnn") {
    if (p.has("v")) {
      h.v = to_vector(p.get<std::vector<double>>("v", {}));
      h.theta = p.get<double>("theta", 0.0);
      if (h.v.size() != n) throw BadConfig("v must have n entries");
    } else if (have_labels) {
      throw BadConfig("--v and --theta are required to map a labeled file");
    } else {
      h.v.resize(n);
      for (int i = 0; i < n; ++i) h.v[i] = rng.normal();
      h.theta = 0.5 * h.v.sum() + 0.1 * rng.normal();
      p.get<std::vector<double>>("v", to_std(h.v));
      p.get<double>("theta", h.theta);
    }
    g = halfspace_to_gnn_weights(h.v, h.theta, n);
  } else if (direction == "to-halfspace") {
    std::string net = p.get<std::string>("gnn", "");
    if (!net.empty()) {
      g = read_gnn(net);
    } else {
      g = CliqueGNN{n, Eigen::VectorXd(n), Eigen::VectorXd(n), rng.normal()};
      for (int j = 0; j < n; ++j) {
        g.a[j] = rng.uniform(-2.0, 0.5);
        g.b[j] = rng.normal();
      }
    }
    h = gnn_to_halfspace(g, n);
  } else {
    throw BadConfig("direction must be to-gnn or to-halfspace");
  }
  if (!have_labels)
    for (const auto& pt : ds.points) ds.labels.push_back(sign_label(halfspace_margin(h, pt)));

  std::vector<double> outs;
  Comparison c = compare(g, h, ds.points, outs);
  auto reduced = reduce_halfspace_to_graphs(ds);
  long indicator_errors = 0;
  for (std::size_t i = 0; i < reduced.size(); ++i)
    if (clique_indicator(reduced[i].A, n) != ds.points[i]) ++indicator_errors;
  std::vector<int> gnn_pred;
  for (double o : outs) gnn_pred.push_back(sign_label(o));
  double agree = agreement(ds.labels, gnn_pred);

  ctx.out.write("dataset.csv", [&](std::ostream& os) { write_halfspace_csv(os, ds); });
  ctx.out.write_json("gnn.json", gnn_json(g));
  ctx.out.write_json("halfspace.json", {{"v", to_std(h.v)}, {"theta", h.theta}});
  ctx.out.write("predictions.csv", [&](std::ostream& os) {
    os << std::setprecision(17) << "point,label,gnn_output,margin\n";
    for (std::size_t i = 0; i < ds.points.size(); ++i)
      os << i << ',' << ds.labels[i] << ',' << outs[i] << ',' << halfspace_margin(h, ds.points[i]) << '\n';
  });
  if (graphs)
    ctx.out.write("graphs.txt", [&](std::ostream& os) {
      for (std::size_t i = 0; i < reduced.size(); ++i) {
        os << "# graph " << i << " label " << reduced[i].y << '\n';
        write_edge_list(os, reduced[i].A);
      }
    });
  if (c.disagreements) ctx.fail(std::to_string(c.disagreements) + " points where network and halfspace signs differ");
  if (indicator_errors) ctx.fail(std::to_string(indicator_errors) + " graphs whose clique indicator is not the point");
  return {{"direction", direction},
          {"n", n},
          {"points", c.compared},
          {"sign_disagreements", c.disagreements},
          {"ties_skipped", c.ties},
          {"max_abs_output_minus_margin", c.max_abs_diff},
          {"label_agreement", agree},
          {"indicator_errors", indicator_errors}};
}

}  // namespace

std::vector<Subcommand> np_subcommands() {
  return {{"np-reduce",
           "Map halfspaces over {0,1}^n to one-layer clique GNNs and back, checking sign equivalence",
           {{"direction", FlagKind::Text, "to-gnn | to-halfspace (default to-gnn)"},
            {"input", FlagKind::Text, "Halfspace CSV (x0,...,label); otherwise points are generated"},
            {"n", FlagKind::Int, "Bits when generating points (default 6)"},
            {"points", FlagKind::Int, "Random points to draw; 0 takes all 2^n (default 0)"},
            {"v", FlagKind::RealList, "Halfspace normal for to-gnn; random when absent"},
            {"theta", FlagKind::Real, "Halfspace offset for to-gnn"},
            {"gnn", FlagKind::Text, "Network JSON {a, b, c} for to-halfspace; random when absent"},
            {"write-graphs", FlagKind::Switch, "Also write every reduced graph as an edge list"}},
           np_reduce_cmd}};
}

}  // namespace invlab::cli

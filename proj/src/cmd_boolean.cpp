#include <iomanip>

#include "cli.hpp"
#include "invlab/groups_frames.hpp"
#include "invlab/hard_families.hpp"

namespace invlab::cli {

namespace {

Representation make_representation(const std::string& rep, int n) {
  if (n < 1) throw BadConfig("n must be >= 1");
  if (rep == "cyclic") return Representation::bits(n, cyclic_generators(n));
  if (rep == "symmetric") return Representation::bits(n, symmetric_generators(n));
  if (rep == "dihedral") {
    std::vector<int> flip(n);
    for (int i = 0; i < n; ++i) flip[i] = n - 1 - i;
    return Representation::bits(n, {Permutation::rotation(n, 1), Permutation(flip)});
  }
  if (rep == "sign-flip") return Representation::sign_flip(n);
  if (rep == "graph") return Representation::graphs(n);
  throw BadConfig("rep must be cyclic, symmetric, dihedral, sign-flip or graph");
}

json orbit_census_cmd(RunContext& ctx) {
  auto& p = ctx.params;
  std::string rep = p.get<std::string>("rep", "cyclic");
  int n = p.get<int>("n", 4);
  double tau = p.get<double>("tau", 0.1);
  int necklace_max = p.get<int>("necklace_max", 0);
  int table1 = p.get<int>("table1", 0);

  OrbitCensus c = orbit_census_boolean(make_representation(rep, n), tau);
  ctx.out.write("orbits.csv", [&](std::ostream& os) {
    os << "orbit,size\n";
    for (std::size_t i = 0; i < c.orbit_sizes.size(); ++i) os << i << ',' << c.orbit_sizes[i] << '\n';
  });
  ctx.out.write("census.csv", [&](std::ostream& os) {
    os << std::setprecision(17) << "rep,n,domain_size,num_orbits,max_orbit,p_norm_sq,tau,query_bound\n"
       << rep << ',' << n << ',' << c.domain_size << ',' << c.num_orbits() << ',' << c.max_orbit() << ','
       << c.p_norm_sq << ',' << c.tau << ',' << c.query_bound << '\n';
  });
  json summary = {{"rep", rep},
                  {"n", n},
                  {"domain_size", c.domain_size},
                  {"num_orbits", c.num_orbits()},
                  {"max_orbit", c.max_orbit()},
                  {"p_norm_sq", c.p_norm_sq},
                  {"query_bound", c.query_bound}};

  if (necklace_max > 0) {
    if (necklace_max > kMaxCensusBits) throw BadConfig("necklace-max is limited to 20");
    bool all = true;
    ctx.out.write("necklaces.csv", [&](std::ostream& os) {
      os << "n,burnside,exhaustive,match\n";
      for (int m = 1; m <= necklace_max; ++m) {
        auto b = necklace_count(m);
        auto e = orbit_census_boolean(Representation::bits(m, cyclic_generators(m)), tau).num_orbits();
        all = all && b == e;
        os << m << ',' << b << ',' << e << ',' << (b == e) << '\n';
      }
    });
    if (!all) ctx.fail("Burnside necklace count differs from exhaustive enumeration");
    summary["necklaces_match"] = all;
  }
  if (table1 > 0) {
    auto rows = table1_rows(table1);
    ctx.out.write("table1.csv", [&](std::ostream& os) {
      os << std::setprecision(17) << "group,log2_max_orbit,log2_domain,log2_fraction,fraction,log2_query_bound\n";
      for (const auto& r : rows)
        os << r.group << ',' << r.log2_max_orbit << ',' << r.log2_domain << ',' << r.log2_fraction << ','
           << r.fraction << ',' << r.log2_query_bound << '\n';
    });
    summary["table1_rows"] = rows.size();
  }
  return summary;
}

json collision_cmd(RunContext& ctx) {
  auto& p = ctx.params;
  auto ns = p.get<std::vector<int>>("ns", {5, 10, 15});
  long pairs = p.get<long>("pairs", 10000);
  std::vector<CollisionReport> reps;
  for (std::size_t i = 0; i < ns.size(); ++i) reps.push_back(parity_profile_collision(ns[i], pairs, ctx.seed + i));
  bool uniform = true, decreasing = true;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    uniform = uniform && reps[i].all_uniform;
    if (i > 0 && ns[i] > ns[i - 1]) decreasing = decreasing && reps[i].collision_rate < reps[i - 1].collision_rate;
  }
  ctx.out.write("collision.csv", [&](std::ostream& os) {
    os << std::setprecision(17) << "n,pairs,collisions,collision_rate,exact_rate,uniform_pairs_checked,all_uniform\n";
    for (const auto& r : reps) {
      os << r.n << ',' << r.pairs << ',' << r.collisions << ',' << r.collision_rate << ',';
      if (r.n <= 4) os << exact_profile_collision_rate(r.n);
      os << ',' << r.conditional.size() << ',' << r.all_uniform << '\n';
    }
  });
  if (!uniform) ctx.fail("conditional output distribution is not uniform on a non-colliding pair");
  if (!decreasing) ctx.fail("collision rate does not strictly decrease in n");
  json rates = json::array();
  for (const auto& r : reps) rates.push_back({{"n", r.n}, {"collision_rate", r.collision_rate}});
  return {{"rates", rates}, {"all_uniform", uniform}, {"strictly_decreasing", decreasing}};
}

}  // namespace

std::vector<Subcommand> boolean_subcommands() {
  return {
      {"orbit-census",
       "Orbit sizes and the p-norm of a group action on a Boolean domain",
       {{"rep", FlagKind::Text, "cyclic | symmetric | dihedral | sign-flip | graph"},
        {"n", FlagKind::Int, "Bits, or nodes for --rep graph (default 4)"},
        {"tau", FlagKind::Real, "SQ tolerance for the query bound (default 0.1)"},
        {"necklace-max", FlagKind::Int, "Also compare Burnside necklace counts with enumeration for n = 1..N"},
        {"table1", FlagKind::Int, "Also write closed-form largest-orbit rows at this n"}},
       orbit_census_cmd},
      {"collision",
       "Collision rate of parity degree profiles and conditional uniformity of the outputs",
       {{"ns", FlagKind::IntList, "Comma-separated node counts (default 5,10,15)"},
        {"pairs", FlagKind::Int, "Graph pairs per n (default 10000)"}},
       collision_cmd},
  };
}

}  // namespace invlab::cli

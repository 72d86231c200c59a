#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "cli.hpp"

namespace invlab::cli {

namespace fs = std::filesystem;

Outputs::Outputs(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw BadConfig("cannot create output directory " + dir_.string() + ": " + ec.message());
}

void Outputs::write(const std::string& name, const std::function<void(std::ostream&)>& fill) {
  fs::path target = dir_ / name;
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw BadConfig("cannot write " + tmp.string());
    fill(os);
    if (!os) throw BadConfig("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
  std::lock_guard<std::mutex> lock(mu_);
  if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
}

void Outputs::write_json(const std::string& name, const json& j) {
  write(name, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

std::vector<std::string> Outputs::files() const {
  std::lock_guard<std::mutex> lock(mu_);
  auto f = files_;
  std::sort(f.begin(), f.end());
  return f;
}

std::string key_of(const std::string& flag) {
  std::string k = flag;
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

namespace {

template <class T, class Conv>
std::vector<T> parse_list(const std::string& s, Conv conv) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw BadConfig("empty entry in list '" + s + "'");
    std::size_t used = 0;
    T v{};
    try {
      v = conv(item, &used);
    } catch (const std::logic_error&) {
      throw BadConfig("bad number '" + item + "'");
    }
    if (used != item.size()) throw BadConfig("bad number '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw BadConfig("empty list");
  return out;
}

std::vector<double> parse_real_list(const std::string& s) {
  return parse_list<double>(s, [](const std::string& x, std::size_t* u) { return std::stod(x, u); });
}

json flag_value(const Flag& f, const std::string& text) {
  switch (f.kind) {
    case FlagKind::Int: return parse_list<long long>(text, [](const std::string& x, std::size_t* u) {
                          return std::stoll(x, u);
                        }).at(0);
    case FlagKind::Real: return parse_real_list(text).at(0);
    case FlagKind::Text: return text;
    case FlagKind::Switch: return true;
    case FlagKind::IntList: return parse_int_list(text);
    case FlagKind::RealList: return parse_real_list(text);
  }
  return nullptr;
}

json load_config(const std::string& path, const std::string& sub, std::uint64_t& seed) {
  std::ifstream is(path);
  if (!is) throw BadConfig("cannot open config " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw BadConfig("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw BadConfig("config must be a JSON object");
  if (!j.contains("subcommand")) return j;
  // A manifest written by an earlier run.
  if (j.at("subcommand") != sub) throw BadConfig("manifest is for subcommand " + j.at("subcommand").dump());
  if (j.contains("seed")) {
    try {
      seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw BadConfig(std::string("manifest seed: ") + e.what());
    }
  }
  return j.value("params", json::object());
}

}  // namespace

std::vector<int> parse_int_list(const std::string& s) {
  return parse_list<int>(s, [](const std::string& x, std::size_t* u) { return std::stoi(x, u); });
}

std::vector<Subcommand> subcommands() {
  std::vector<Subcommand> all;
  for (auto part : {boolean_subcommands(), hermite_subcommands(), hard_subcommands(), learn_subcommands(),
                    np_subcommands(), train_subcommands()})
    for (auto& s : part) all.push_back(std::move(s));
  return all;
}

int run_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  auto subs = subcommands();
  if (argc >= 2 && argv[1][0] != '-') {
    std::string name = argv[1];
    bool known = std::any_of(subs.begin(), subs.end(), [&](const Subcommand& s) { return s.name == name; });
    if (!known) {
      err << "UnknownSubcommand: " << name << "\n";
      return 2;
    }
  }

  CLI::App app{"Invariant-learning lab: hardness families, SQ learners and training experiments"};
  app.require_subcommand(1, 1);
  struct Raw {
    std::string config, out;
    std::uint64_t seed = kDefaultSeed;
    CLI::Option* seed_opt = nullptr;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> opts;
  };
  std::vector<Raw> raw(subs.size());
  std::vector<CLI::App*> apps;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    auto* sc = app.add_subcommand(subs[i].name, subs[i].help);
    sc->add_option("--config", raw[i].config, "JSON params object, or a manifest.json from an earlier run");
    raw[i].seed_opt = sc->add_option("--seed", raw[i].seed, "Random seed (default " + std::to_string(kDefaultSeed) + ")");
    sc->add_option("--out", raw[i].out, "Output directory (default invlab_out/<subcommand>)");
    for (const auto& f : subs[i].flags) {
      if (f.kind == FlagKind::Switch)
        raw[i].opts[f.name] = sc->add_flag("--" + f.name, f.help);
      else
        raw[i].opts[f.name] = sc->add_option("--" + f.name, raw[i].values[f.name], f.help);
    }
    apps.push_back(sc);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  std::size_t idx = 0;
  while (idx < apps.size() && !apps[idx]->parsed()) ++idx;
  const Subcommand& sub = subs[idx];
  Raw& r = raw[idx];

  try {
    std::uint64_t seed = kDefaultSeed;
    json given = r.config.empty() ? json::object() : load_config(r.config, sub.name, seed);
    std::set<std::string> keys;
    for (const auto& f : sub.flags) keys.insert(key_of(f.name));
    for (auto it = given.begin(); it != given.end(); ++it)
      if (!keys.count(it.key())) throw BadConfig("unknown parameter '" + it.key() + "' for " + sub.name);
    for (const auto& f : sub.flags)
      if (r.opts[f.name]->count() > 0) given[key_of(f.name)] = flag_value(f, r.values[f.name]);
    if (r.seed_opt->count() > 0) seed = r.seed;

    Outputs outs(r.out.empty() ? fs::path("invlab_out") / sub.name : fs::path(r.out));
    RunContext ctx{Params(given), seed, outs, {}};
    json summary = sub.run(ctx);
    ctx.params.reject_unknown();

    json manifest = {{"subcommand", sub.name},
                     {"params", ctx.params.resolved()},
                     {"seed", seed},
                     {"outputs", outs.files()},
                     {"status", ctx.failures.empty() ? "ok" : "check_failed"},
                     {"failures", ctx.failures},
                     {"summary", summary}};
    outs.write_json("manifest.json", manifest);
    out << summary.dump(2) << '\n';
    if (!ctx.failures.empty()) {
      for (const auto& f : ctx.failures) err << "CheckFailed: " << f << '\n';
      return 3;
    }
    return 0;
  } catch (const Error& e) {
    err << e.kind() << ": " << e.what() << '\n';
    return e.numerical() ? 3 : 2;
  } catch (const json::exception& e) {
    err << "BadConfig: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "Error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace invlab::cli

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "invlab/common.hpp"

namespace invlab::cli {

using json = nlohmann::json;

struct UnknownSubcommand : Error {
  using Error::Error;
  const char* kind() const noexcept override { return "UnknownSubcommand"; }
};

struct BadConfig : Error {
  using Error::Error;
  const char* kind() const noexcept override { return "BadConfig"; }
};

// A numerical property checked by a subcommand did not hold.
struct CheckFailed : Error {
  using Error::Error;
  const char* kind() const noexcept override { return "CheckFailed"; }
  bool numerical() const noexcept override { return true; }
};

// Seed used when neither --seed nor the manifest provides one.
inline constexpr std::uint64_t kDefaultSeed = 20240601;

// Parameter bag. Every read records the effective value, so the resolved
// object replayed as a manifest reproduces the run.
class Params {
 public:
  explicit Params(json given = json::object()) : given_(std::move(given)), resolved_(json::object()) {
    if (!given_.is_object()) throw BadConfig("params must be a JSON object");
  }

  template <class T>
  T get(const std::string& key, const T& fallback) {
    T v = fallback;
    if (given_.contains(key)) {
      try {
        v = given_.at(key).get<T>();
      } catch (const json::exception& e) {
        throw BadConfig("parameter '" + key + "': " + e.what());
      }
    }
    used_.insert(key);
    resolved_[key] = v;
    return v;
  }

  bool has(const std::string& key) const { return given_.contains(key); }
  const json& resolved() const { return resolved_; }

  // Keys supplied but never read are typos or options of another subcommand.
  void reject_unknown() const {
    for (auto it = given_.begin(); it != given_.end(); ++it)
      if (!used_.count(it.key())) throw BadConfig("unknown parameter '" + it.key() + "'");
  }

 private:
  json given_;
  json resolved_;
  std::set<std::string> used_;
};

// Output directory. Each file is written to a temporary name and renamed into
// place, so concurrent runs never expose partial files.
class Outputs {
 public:
  explicit Outputs(std::filesystem::path dir);

  void write(const std::string& name, const std::function<void(std::ostream&)>& fill);
  void write_json(const std::string& name, const json& j);
  std::vector<std::string> files() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::vector<std::string> files_;
};

struct RunContext {
  Params params;
  std::uint64_t seed = kDefaultSeed;
  Outputs& out;
  std::vector<std::string> failures;

  // Records a failed numerical check; the run still writes its outputs.
  void fail(const std::string& what) { failures.push_back(what); }
};

enum class FlagKind { Int, Real, Text, Switch, IntList, RealList };

struct Flag {
  std::string name;  // without dashes; the params key replaces '-' by '_'
  FlagKind kind;
  std::string help;
};

struct Subcommand {
  std::string name;
  std::string help;
  std::vector<Flag> flags;
  std::function<json(RunContext&)> run;  // returns the summary object
};

std::vector<Subcommand> subcommands();

// Per-module registries, concatenated by subcommands().
std::vector<Subcommand> boolean_subcommands();  // orbit-census, collision
std::vector<Subcommand> hermite_subcommands();  // verify-hermite
std::vector<Subcommand> hard_subcommands();     // hard-family
std::vector<Subcommand> learn_subcommands();    // growing-basis, csq-baseline, sq-demo
std::vector<Subcommand> np_subcommands();       // np-reduce
std::vector<Subcommand> train_subcommands();    // train, gradcheck

// Parses argv, runs one subcommand, writes manifest.json. Returns 0 on
// success, 2 on validation errors and 3 on failed numerical checks.
int run_main(int argc, char** argv, std::ostream& out, std::ostream& err);

// Helpers shared by subcommands.
std::vector<int> parse_int_list(const std::string& s);
std::string key_of(const std::string& flag);

}  // namespace invlab::cli

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace invlab {

// Every library failure derives from Error and names its kind.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
  // True for failures of a numerical check rather than of caller input.
  virtual bool numerical() const noexcept { return false; }
};

#define INVLAB_DEFINE_ERROR(Name, IsNumerical)                          \
  struct Name : Error {                                                 \
    using Error::Error;                                                 \
    const char* kind() const noexcept override { return #Name; }        \
    bool numerical() const noexcept override { return IsNumerical; }    \
  };

INVLAB_DEFINE_ERROR(SingularMoments, true)
INVLAB_DEFINE_ERROR(DegreeOverflow, false)
INVLAB_DEFINE_ERROR(DimensionMismatch, false)
INVLAB_DEFINE_ERROR(CapExceeded, false)
INVLAB_DEFINE_ERROR(TooLarge, false)
INVLAB_DEFINE_ERROR(InvalidArgument, false)
INVLAB_DEFINE_ERROR(ParseError, false)
INVLAB_DEFINE_ERROR(Infeasible, true)
INVLAB_DEFINE_ERROR(TooWide, false)
INVLAB_DEFINE_ERROR(UnboundedQuery, false)
INVLAB_DEFINE_ERROR(AmbiguousClass, false)
INVLAB_DEFINE_ERROR(BudgetExceeded, true)
INVLAB_DEFINE_ERROR(SingularSystem, true)
INVLAB_DEFINE_ERROR(Diverged, true)
INVLAB_DEFINE_ERROR(ShapeError, false)
INVLAB_DEFINE_ERROR(SingularM, true)

#undef INVLAB_DEFINE_ERROR

// All randomness goes through a seeded 64-bit Mersenne twister. Random keeps
// the engine and the normal sampler together so cached normal deviates never
// leak between streams.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Random {
 public:
  explicit Random(std::uint64_t seed, std::uint64_t stream = 0)
      : eng_(splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL))) {}

  double normal() { return nd_(eng_); }
  double uniform() { return ud_(eng_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * ud_(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  double sign() { return (eng_() & 1ULL) ? 1.0 : -1.0; }
  bool bit() { return (eng_() & 1ULL) != 0; }
  std::uint64_t bits() { return eng_(); }
  Rng& engine() { return eng_; }

 private:
  Rng eng_;
  std::normal_distribution<double> nd_{0.0, 1.0};
  std::uniform_real_distribution<double> ud_{0.0, 1.0};
};

// Worker count from LAB_THREADS, defaulting to hardware concurrency.
inline int lab_threads() {
  if (const char* s = std::getenv("LAB_THREADS")) {
    int v = std::atoi(s);
    if (v >= 1) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs body(chunk) for chunk in [0, chunks). Work is partitioned by chunk
// index only, so results are independent of the thread count as long as the
// caller reduces per-chunk outputs in chunk order.
inline void parallel_chunks(int chunks, const std::function<void(int)>& body) {
  int threads = std::min(lab_threads(), chunks);
  if (threads <= 1) {
    for (int c = 0; c < chunks; ++c) body(c);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (int c = t; c < chunks; c += threads) body(c);
    });
  for (auto& th : pool) th.join();
}

inline std::uint64_t binom_u64(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / i;
  return r;
}

}  // namespace invlab

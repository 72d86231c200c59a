#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "invlab/common.hpp"

namespace invlab {

// Bijection on {0..n-1}; image[i] is where position i goes. Composition is
// (g*h)(i) = g(h(i)); acting on rows, (g.X)[g(i)] = X[i].
struct Permutation {
  std::vector<int> image;

  Permutation() = default;
  explicit Permutation(std::vector<int> img) : image(std::move(img)) {
    std::vector<char> seen(image.size(), 0);
    for (int v : image) {
      if (v < 0 || v >= size() || seen[v]) throw InvalidArgument("image is not a bijection");
      seen[v] = 1;
    }
  }

  static Permutation identity(int n) {
    std::vector<int> img(n);
    std::iota(img.begin(), img.end(), 0);
    return Permutation(std::move(img));
  }

  // Cycle (c0 c1 ... ck): c0 -> c1 -> ... -> ck -> c0.
  static Permutation cycle(int n, const std::vector<int>& c) {
    auto p = identity(n);
    for (std::size_t i = 0; i < c.size(); ++i) p.image[c[i]] = c[(i + 1) % c.size()];
    return Permutation(p.image);
  }

  static Permutation rotation(int n, int k) {
    std::vector<int> img(n);
    for (int i = 0; i < n; ++i) img[i] = ((i + k) % n + n) % n;
    return Permutation(std::move(img));
  }

  int size() const { return static_cast<int>(image.size()); }
  int operator()(int i) const { return image[i]; }

  Permutation operator*(const Permutation& h) const {
    if (h.size() != size()) throw DimensionMismatch("composing permutations of different degree");
    std::vector<int> img(size());
    for (int i = 0; i < size(); ++i) img[i] = image[h.image[i]];
    Permutation r;
    r.image = std::move(img);
    return r;
  }

  Permutation inverse() const {
    Permutation r;
    r.image.assign(size(), 0);
    for (int i = 0; i < size(); ++i) r.image[image[i]] = i;
    return r;
  }

  bool is_identity() const {
    for (int i = 0; i < size(); ++i)
      if (image[i] != i) return false;
    return true;
  }

  friend bool operator==(const Permutation& a, const Permutation& b) { return a.image == b.image; }
  friend bool operator<(const Permutation& a, const Permutation& b) { return a.image < b.image; }

  // 0-indexed cycle notation without fixed points, "()" for the identity.
  std::string cycles() const {
    std::string s;
    std::vector<char> seen(size(), 0);
    for (int i = 0; i < size(); ++i) {
      if (seen[i] || image[i] == i) continue;
      s += "(";
      for (int j = i; !seen[j]; j = image[j]) {
        seen[j] = 1;
        if (j != i) s += " ";
        s += std::to_string(j);
      }
      s += ")";
    }
    return s.empty() ? "()" : s;
  }

  std::string image_str() const {
    std::string s = "[";
    for (int i = 0; i < size(); ++i) s += (i ? " " : "") + std::to_string(image[i]);
    return s + "]";
  }
};

struct PermutationHash {
  std::size_t operator()(const Permutation& p) const {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (int v : p.image) h = splitmix64(h ^ static_cast<std::uint64_t>(v));
    return static_cast<std::size_t>(h);
  }
};

// Row action (g.X)[g(i)] = X[i].
inline Eigen::MatrixXd act_rows(const Permutation& g, const Eigen::MatrixXd& X) {
  if (g.size() != X.rows()) throw DimensionMismatch("permutation degree differs from row count");
  Eigen::MatrixXd Y(X.rows(), X.cols());
  for (int i = 0; i < g.size(); ++i) Y.row(g(i)) = X.row(i);
  return Y;
}

inline Eigen::VectorXd act(const Permutation& g, const Eigen::VectorXd& x) {
  if (g.size() != x.size()) throw DimensionMismatch("permutation degree differs from vector length");
  Eigen::VectorXd y(x.size());
  for (int i = 0; i < g.size(); ++i) y[g(i)] = x[i];
  return y;
}

// Number of fixed points of g^{-1} h.
inline int fixed_points(const Permutation& g, const Permutation& h) {
  if (g.size() != h.size()) throw DimensionMismatch("fixed_points on different degrees");
  int c = 0;
  for (int i = 0; i < g.size(); ++i) c += (g(i) == h(i));
  return c;
}

inline constexpr std::size_t kDefaultGroupCap = 10000;

class PermGroup {
 public:
  PermGroup() = default;

  int n() const { return n_; }
  std::size_t order() const { return elements_.size(); }
  const std::vector<Permutation>& elements() const { return elements_; }
  const std::vector<Permutation>& generators() const { return generators_; }
  const Permutation& operator[](std::size_t i) const { return elements_[i]; }

  bool contains(const Permutation& p) const { return index_.count(p) > 0; }
  std::size_t index_of(const Permutation& p) const {
    auto it = index_.find(p);
    if (it == index_.end()) throw InvalidArgument("permutation not in group");
    return it->second;
  }

  // Exhaustive closure check: products and inverses of all elements.
  bool verify_closed() const {
    if (elements_.empty() || !elements_[0].is_identity()) return false;
    for (const auto& a : elements_) {
      if (!contains(a.inverse())) return false;
      for (const auto& b : elements_)
        if (!contains(a * b)) return false;
    }
    return true;
  }

  // Closure of the generators by breadth-first multiplication. The identity
  // comes first; the rest follow discovery order.
  static PermGroup generate(int n, const std::vector<Permutation>& gens, std::size_t cap = kDefaultGroupCap) {
    PermGroup G;
    G.n_ = n;
    G.generators_ = gens;
    for (const auto& g : gens)
      if (g.size() != n) throw DimensionMismatch("generator degree differs from n");
    G.add(Permutation::identity(n));
    for (std::size_t head = 0; head < G.elements_.size(); ++head) {
      for (const auto& g : gens) {
        Permutation p = g * G.elements_[head];
        if (G.contains(p)) continue;
        if (G.elements_.size() >= cap)
          throw CapExceeded("group closure exceeds cap " + std::to_string(cap));
        G.add(std::move(p));
      }
    }
    return G;
  }

  // Group from an explicit element list; rejected unless it is closed.
  static PermGroup from_elements(int n, std::vector<Permutation> elems) {
    PermGroup G;
    G.n_ = n;
    auto id = Permutation::identity(n);
    G.add(id);
    for (auto& e : elems)
      if (!G.contains(e)) G.add(std::move(e));
    G.generators_ = G.elements_;
    if (!G.verify_closed()) throw InvalidArgument("element list is not a group");
    return G;
  }

 private:
  void add(Permutation p) {
    index_.emplace(p, elements_.size());
    elements_.push_back(std::move(p));
  }

  int n_ = 0;
  std::vector<Permutation> elements_;
  std::vector<Permutation> generators_;
  std::unordered_map<Permutation, std::size_t, PermutationHash> index_;
};

inline PermGroup enumerate_group(const std::vector<Permutation>& generators, std::size_t cap = kDefaultGroupCap) {
  if (generators.empty()) throw InvalidArgument("need at least one generator");
  return PermGroup::generate(generators.front().size(), generators, cap);
}

inline std::vector<Permutation> cyclic_generators(int n) { return {Permutation::rotation(n, 1)}; }

inline std::vector<Permutation> symmetric_generators(int n) {
  std::vector<Permutation> g;
  for (int i = 0; i + 1 < n; ++i) g.push_back(Permutation::cycle(n, {i, i + 1}));
  if (g.empty()) g.push_back(Permutation::identity(n));
  return g;
}

inline PermGroup cyclic_group(int n) { return enumerate_group(cyclic_generators(n)); }

// ---------------------------------------------------------------------------
// Orbit census over Boolean domains.

enum class RepresentationKind { BitPermutation, GraphNodePermutation, SignFlip };

struct Representation {
  RepresentationKind kind = RepresentationKind::BitPermutation;
  int n = 0;                            // bits, or graph nodes
  std::vector<Permutation> generators;  // for BitPermutation

  static Representation bits(const PermGroup& G) { return {RepresentationKind::BitPermutation, G.n(), G.generators()}; }
  static Representation bits(int n, std::vector<Permutation> gens) {
    return {RepresentationKind::BitPermutation, n, std::move(gens)};
  }
  static Representation graphs(int nodes) { return {RepresentationKind::GraphNodePermutation, nodes, {}}; }
  static Representation sign_flip(int n) { return {RepresentationKind::SignFlip, n, {}}; }

  int domain_bits() const { return kind == RepresentationKind::GraphNodePermutation ? n * n : n; }
};

struct OrbitCensus {
  std::vector<std::uint64_t> orbit_sizes;  // ascending
  std::uint64_t domain_size = 0;
  double p_norm_sq = 0.0;
  double tau = 0.0;
  double query_bound = 0.0;  // tau^2 / (2 p_norm_sq)

  std::size_t num_orbits() const { return orbit_sizes.size(); }
  std::uint64_t max_orbit() const { return orbit_sizes.empty() ? 0 : orbit_sizes.back(); }

  std::map<std::uint64_t, std::uint64_t> size_histogram() const {
    std::map<std::uint64_t, std::uint64_t> h;
    for (auto s : orbit_sizes) ++h[s];
    return h;
  }

  void write_csv(std::ostream& os) const {
    os << "orbit_size,count\n";
    for (auto [s, c] : size_histogram()) os << s << ',' << c << '\n';
  }
};

namespace detail {

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a), b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent[a] = b;
  }
};

// Bit i of x moves to bit p(i).
inline std::uint32_t permute_bits(std::uint32_t x, const std::vector<int>& p) {
  std::uint32_t y = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (x >> i & 1u) y |= 1u << p[i];
  return y;
}

}  // namespace detail

inline constexpr int kMaxCensusBits = 20;

// Exhaustive union-find over the action of the representation's generators.
inline OrbitCensus orbit_census_boolean(const Representation& rep, double tau) {
  int bits = rep.domain_bits();
  if (rep.kind == RepresentationKind::GraphNodePermutation && rep.n > 4)
    throw TooLarge("graph census limited to 4 nodes");
  if (bits > kMaxCensusBits) throw TooLarge("census limited to 20 bits");
  if (bits < 1) throw InvalidArgument("empty domain");

  std::vector<std::vector<int>> moves;
  switch (rep.kind) {
    case RepresentationKind::BitPermutation:
      for (const auto& g : rep.generators) {
        if (g.size() != rep.n) throw DimensionMismatch("generator degree differs from bit count");
        moves.push_back(g.image);
      }
      break;
    case RepresentationKind::GraphNodePermutation:
      // Entry (i,j) sits at bit i*n+j and moves to (g(i), g(j)).
      for (const auto& g : symmetric_generators(rep.n)) {
        std::vector<int> m(bits);
        for (int i = 0; i < rep.n; ++i)
          for (int j = 0; j < rep.n; ++j) m[i * rep.n + j] = g(i) * rep.n + g(j);
        moves.push_back(std::move(m));
      }
      break;
    case RepresentationKind::SignFlip:
      break;
  }

  const std::uint32_t N = 1u << bits;
  detail::UnionFind uf(N);
  for (std::uint32_t x = 0; x < N; ++x) {
    if (rep.kind == RepresentationKind::SignFlip) {
      for (int i = 0; i < bits; ++i) uf.unite(x, x ^ (1u << i));
    } else {
      for (const auto& m : moves) uf.unite(x, detail::permute_bits(x, m));
    }
  }
  std::vector<std::uint64_t> count(N, 0);
  for (std::uint32_t x = 0; x < N; ++x) ++count[uf.find(x)];

  OrbitCensus c;
  c.domain_size = N;
  c.tau = tau;
  for (std::uint32_t x = 0; x < N; ++x)
    if (count[x]) c.orbit_sizes.push_back(count[x]);
  std::sort(c.orbit_sizes.begin(), c.orbit_sizes.end());
  long double s = 0.0L;
  for (auto o : c.orbit_sizes) {
    long double f = static_cast<long double>(o) / N;
    s += f * f;
  }
  c.p_norm_sq = static_cast<double>(s);
  c.query_bound = tau * tau / (2.0 * c.p_norm_sq);
  return c;
}

// Binary necklaces of length n by Burnside over the cyclic group.
inline std::uint64_t necklace_count(int n) {
  if (n < 1 || n > 62) throw InvalidArgument("necklace_count needs 1 <= n <= 62");
  auto phi = [](int m) {
    int r = m;
    for (int p = 2; p * p <= m; ++p)
      if (m % p == 0) {
        while (m % p == 0) m /= p;
        r -= r / p;
      }
    if (m > 1) r -= r / m;
    return r;
  };
  unsigned __int128 s = 0;
  for (int d = 1; d <= n; ++d)
    if (n % d == 0) s += static_cast<unsigned __int128>(phi(d)) << (n / d);
  return static_cast<std::uint64_t>(s / n);
}

// Closed-form rows of the invariant Boolean query-complexity table at size n:
// largest orbit as a fraction of the domain and the resulting lower bound
// 2^{N-1} tau^2 / max|O| on the query count (N = domain bits).
struct Table1Row {
  std::string group;
  double log2_max_orbit = 0.0;
  double log2_domain = 0.0;
  double log2_fraction = 0.0;  // log2(max|O| / 2^N)
  double fraction = 0.0;
  double log2_query_bound = 0.0;  // tau = 1
};

inline double log2_factorial(int n) {
  long double s = 0.0L;
  for (int i = 2; i <= n; ++i) s += std::log2(static_cast<long double>(i));
  return static_cast<double>(s);
}

inline std::vector<Table1Row> table1_rows(int n) {
  if (n < 1 || n > 62) throw InvalidArgument("table rows need 1 <= n <= 62");
  auto row = [](std::string name, double lmax, double ldom) {
    Table1Row r;
    r.group = std::move(name);
    r.log2_max_orbit = lmax;
    r.log2_domain = ldom;
    r.log2_fraction = lmax - ldom;
    r.fraction = std::exp2(r.log2_fraction);
    r.log2_query_bound = ldom - 1.0 - lmax;
    return r;
  };
  double lbinom = std::log2(static_cast<double>(binom_u64(n, n / 2)));
  return {row("symmetric_bits", lbinom, n), row("symmetric_graphs", log2_factorial(n), static_cast<double>(n) * n),
          row("cyclic_bits", std::log2(static_cast<double>(n)), n)};
}

// ---------------------------------------------------------------------------
// Frames.

enum class FrameKind { Reynolds, AbsLexSort, LexSort, Constant };

// A frame maps X to a set of group elements with F(gX) = g F(X). Elements g
// are stored so that g^{-1}.X is the canonical representative; averaging
// evaluates h(g^{-1} X).
struct Frame {
  FrameKind kind = FrameKind::Reynolds;
  PermGroup group;                 // Reynolds / Constant
  std::vector<Permutation> fixed;  // Constant

  static Frame reynolds(PermGroup G) { return {FrameKind::Reynolds, std::move(G), {}}; }
  static Frame abs_lex_sort() { return {FrameKind::AbsLexSort, {}, {}}; }
  static Frame lex_sort() { return {FrameKind::LexSort, {}, {}}; }

  // A constant frame must be the whole group; strict subsets are rejected.
  static Frame constant(PermGroup G, std::vector<Permutation> F) {
    std::set<Permutation> S(F.begin(), F.end());
    if (S.empty()) throw InvalidArgument("frame values must be non-empty");
    for (const auto& f : S)
      if (!G.contains(f)) throw InvalidArgument("frame element outside the group");
    for (const auto& g : G.generators())
      for (const auto& f : S)
        if (!S.count(g * f)) throw InvalidArgument("constant frame is not closed under the group: not equivariant");
    return {FrameKind::Constant, std::move(G), std::vector<Permutation>(S.begin(), S.end())};
  }
};

inline constexpr int kMaxEnumeratedTies = 3;

namespace detail {

// All g with g^{-1}.X sorted by key rows. Tie classes up to 3 rows are
// enumerated in full; larger ones keep row-index order.
inline std::vector<Permutation> sorting_frame(const Eigen::MatrixXd& X, bool use_abs) {
  int n = static_cast<int>(X.rows()), d = static_cast<int>(X.cols());
  auto key = [&](int i, int j) { return use_abs ? std::abs(X(i, j)) : X(i, j); };
  auto less = [&](int a, int b) {
    for (int j = 0; j < d; ++j) {
      double ka = key(a, j), kb = key(b, j);
      if (ka != kb) return ka < kb;
    }
    return false;
  };
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), less);

  // order[p] = row at sorted position p, i.e. g(p) for the canonical g.
  std::vector<std::vector<int>> perms = {order};
  for (int start = 0; start < n;) {
    int end = start + 1;
    while (end < n && !less(order[start], order[end])) ++end;
    int len = end - start;
    if (len > 1 && len <= kMaxEnumeratedTies) {
      std::vector<std::vector<int>> next;
      for (const auto& base : perms) {
        std::vector<int> block(base.begin() + start, base.begin() + end);
        std::sort(block.begin(), block.end());
        do {
          auto p = base;
          std::copy(block.begin(), block.end(), p.begin() + start);
          next.push_back(std::move(p));
        } while (std::next_permutation(block.begin(), block.end()));
      }
      perms = std::move(next);
    }
    start = end;
  }
  std::vector<Permutation> out;
  out.reserve(perms.size());
  for (auto& p : perms) out.emplace_back(std::move(p));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

inline std::vector<Permutation> frame_eval(const Frame& F, const Eigen::MatrixXd& X) {
  switch (F.kind) {
    case FrameKind::Reynolds: return F.group.elements();
    case FrameKind::Constant: return F.fixed;
    case FrameKind::AbsLexSort: return detail::sorting_frame(X, true);
    case FrameKind::LexSort: return detail::sorting_frame(X, false);
  }
  return {};
}

inline bool same_set(std::vector<Permutation> a, std::vector<Permutation> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

struct FrameCheckReport {
  int trials = 0;
  int violations = 0;
};

// Counts X with F(X) != F(X o z) for Gaussian X (n x d) and random row signs z.
inline FrameCheckReport check_sign_invariance(const Frame& F, int n, int d, int trials, std::uint64_t seed) {
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  Random rng(seed);
  FrameCheckReport r{trials, 0};
  for (int t = 0; t < trials; ++t) {
    Eigen::MatrixXd X(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) X(i, j) = rng.normal();
    Eigen::MatrixXd Xz = X;
    for (int i = 0; i < n; ++i)
      if (rng.bit()) Xz.row(i) *= -1.0;
    if (!same_set(frame_eval(F, X), frame_eval(F, Xz))) ++r.violations;
  }
  return r;
}

// Counts (X, g) pairs with F(g.X) != g F(X) over the supplied group elements.
inline FrameCheckReport check_equivariance(const Frame& F, const std::vector<Permutation>& elements, int n, int d,
                                           int trials, std::uint64_t seed, bool integer_ties = false) {
  Random rng(seed);
  FrameCheckReport r{0, 0};
  for (int t = 0; t < trials; ++t) {
    Eigen::MatrixXd X(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) X(i, j) = integer_ties ? rng.integer(-2, 2) : rng.normal();
    auto base = frame_eval(F, X);
    for (const auto& g : elements) {
      std::vector<Permutation> moved;
      moved.reserve(base.size());
      for (const auto& f : base) moved.push_back(g * f);
      ++r.trials;
      if (!same_set(frame_eval(F, act_rows(g, X)), moved)) ++r.violations;
    }
  }
  return r;
}

struct InnerStats {
  double mean = 0.0;
  double stdev = 0.0;
  double stderr_ = 0.0;
  double reference = 0.0;  // F / sqrt(n)
  int fixed = 0;
};

// Monte-Carlo <g x, h x> / ||x|| for x ~ N(0, I_n).
inline InnerStats permuted_inner_stats(const Permutation& g, const Permutation& h, int samples, std::uint64_t seed) {
  if (g.size() != h.size()) throw DimensionMismatch("permutations on different degrees");
  if (samples < 2) throw InvalidArgument("need at least 2 samples");
  int n = g.size();
  Random rng(seed);
  Eigen::VectorXd x(n);
  long double s = 0.0L, s2 = 0.0L;
  for (int t = 0; t < samples; ++t) {
    for (int i = 0; i < n; ++i) x[i] = rng.normal();
    double v = act(g, x).dot(act(h, x)) / x.norm();
    s += v;
    s2 += static_cast<long double>(v) * v;
  }
  InnerStats st;
  st.mean = static_cast<double>(s / samples);
  double var = static_cast<double>((s2 - s * s / samples) / (samples - 1));
  st.stdev = std::sqrt(std::max(var, 0.0));
  st.stderr_ = st.stdev / std::sqrt(static_cast<double>(samples));
  st.fixed = fixed_points(g, h);
  st.reference = st.fixed / std::sqrt(static_cast<double>(n));
  return st;
}

// Orbits of m-subsets of [n] under G, each as a sorted vector of sorted subsets.
inline std::vector<std::vector<std::vector<int>>> subset_orbits(const PermGroup& G, int m) {
  int n = G.n();
  if (n > 30) throw TooLarge("subset orbits limited to n <= 30");
  std::vector<std::vector<std::vector<int>>> orbits;
  std::set<std::uint32_t> seen;
  std::vector<int> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  auto mask_of = [](const std::vector<int>& s) {
    std::uint32_t k = 0;
    for (int v : s) k |= 1u << v;
    return k;
  };
  while (true) {
    std::uint32_t key = mask_of(idx);
    if (!seen.count(key)) {
      std::set<std::vector<int>> orbit;
      for (const auto& g : G.elements()) {
        std::vector<int> img;
        for (int v : idx) img.push_back(g(v));
        std::sort(img.begin(), img.end());
        seen.insert(mask_of(img));
        orbit.insert(img);
      }
      orbits.emplace_back(orbit.begin(), orbit.end());
    }
    int i = m - 1;
    while (i >= 0 && idx[i] == n - m + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < m; ++j) idx[j] = idx[j - 1] + 1;
  }
  return orbits;
}

}  // namespace invlab

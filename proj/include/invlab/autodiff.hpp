#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "invlab/common.hpp"

namespace invlab {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Dense row-major tensor. The last axis is the column axis of mat(); all
// leading axes are flattened into rows. A scalar has an empty shape.
// Storage is packet-aligned so vectorized reductions group terms the same way
// on every allocation, keeping results independent of heap layout.

struct Tensor {
  using Storage = std::vector<double, Eigen::aligned_allocator<double>>;
  std::vector<int> shape;
  Storage data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
    for (int d : shape)
      if (d < 0) throw ShapeError("negative extent");
    data.assign(count(shape), fill);
  }

  static std::size_t count(const std::vector<int>& s) {
    std::size_t c = 1;
    for (int d : s) c *= static_cast<std::size_t>(d);
    return c;
  }
  static Tensor scalar(double v) {
    Tensor t(std::vector<int>{});
    t.data[0] = v;
    return t;
  }
  static Tensor from_matrix(const RowMatrix& m) {
    Tensor t({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
    t.mat() = m;
    return t;
  }

  std::size_t size() const { return data.size(); }
  int cols() const { return shape.empty() ? 1 : shape.back(); }
  int rows() const {
    int c = cols();
    return c == 0 ? 0 : static_cast<int>(size() / static_cast<std::size_t>(c));
  }
  Eigen::Map<RowMatrix> mat() { return {data.data(), rows(), cols()}; }
  Eigen::Map<const RowMatrix> mat() const { return {data.data(), rows(), cols()}; }
  Eigen::Map<Eigen::VectorXd> vec() { return {data.data(), static_cast<Eigen::Index>(size())}; }
  Eigen::Map<const Eigen::VectorXd> vec() const { return {data.data(), static_cast<Eigen::Index>(size())}; }
  double item() const {
    if (size() != 1) throw ShapeError("item() needs a single element");
    return data[0];
  }
};

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

// ---------------------------------------------------------------------------
// Reverse-mode tape. Nodes are appended in evaluation order, so reverse
// index order is a valid topological order for the backward sweep.

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;
  const Tensor& value() const;
  const Tensor& grad() const;
  const std::vector<int>& shape() const { return value().shape; }
};

class Tape {
 public:
  using Vjp = std::function<void(Tape&, int)>;

  Var constant(Tensor t) { return push(std::move(t), {}, nullptr, false); }
  Var parameter(Tensor t) { return push(std::move(t), {}, nullptr, true); }

  Var push(Tensor value, std::vector<int> inputs, Vjp vjp, bool leaf_grad = false) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = leaf_grad;
    for (int i : inputs) n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
    n.inputs = std::move(inputs);
    n.vjp = std::move(vjp);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor& value(int id) const { return nodes_[id].value; }
  const Tensor& grad(int id) const { return nodes_[id].grad; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }
  int backward_visits() const { return visits_; }

  // Gradient accumulator of node id, allocated on first use.
  Tensor& grad_buffer(int id) {
    Node& n = nodes_[id];
    if (n.grad.shape != n.value.shape || n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape);
    return n.grad;
  }

  void backward(Var loss) {
    if (loss.tape != this) throw InvalidArgument("loss belongs to another tape");
    if (value(loss.id).size() != 1) throw ShapeError("backward needs a scalar loss");
    for (auto& n : nodes_) n.grad = Tensor();
    visits_ = 0;
    grad_buffer(loss.id).data[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      ++visits_;
      if (n.vjp) n.vjp(*this, i);
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<int> inputs;
    Vjp vjp;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  int visits_ = 0;
};

inline const Tensor& Var::value() const { return tape->value(id); }
inline const Tensor& Var::grad() const { return tape->grad(id); }

namespace detail {

inline void same_tape(const Var& a, const Var& b) {
  if (a.tape != b.tape || a.tape == nullptr) throw InvalidArgument("variables from different tapes");
}

inline void accumulate(Tape& t, int id, const Tensor& g) {
  if (!t.needs_grad(id)) return;
  t.grad_buffer(id).vec() += g.vec();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations.

// [m,k] x [k,n] -> [m,n].
inline Var matmul(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  const Tensor &A = a.value(), &B = b.value();
  if (A.shape.size() != 2 || B.shape.size() != 2 || A.shape[1] != B.shape[0])
    throw ShapeError("matmul " + shape_str(A.shape) + " x " + shape_str(B.shape));
  Tensor out({A.shape[0], B.shape[1]});
  out.mat().noalias() = A.mat() * B.mat();
  int ia = a.id, ib = b.id;
  return a.tape->push(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    const auto& G = t.grad(self).mat();
    if (t.needs_grad(ia)) t.grad_buffer(ia).mat().noalias() += G * t.value(ib).mat().transpose();
    if (t.needs_grad(ib)) t.grad_buffer(ib).mat().noalias() += t.value(ia).mat().transpose() * G;
  });
}

// Same-shape sum, or a row vector b of length cols(a) broadcast over rows.
inline Var add(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  const Tensor &A = a.value(), &B = b.value();
  bool broadcast = A.shape != B.shape;
  if (broadcast && !(B.shape.size() == 1 && B.shape[0] == A.cols() && !A.shape.empty()))
    throw ShapeError("add " + shape_str(A.shape) + " + " + shape_str(B.shape));
  Tensor out = A;
  if (broadcast)
    out.mat().rowwise() += B.vec().transpose();
  else
    out.vec() += B.vec();
  int ia = a.id, ib = b.id;
  return a.tape->push(std::move(out), {ia, ib}, [ia, ib, broadcast](Tape& t, int self) {
    const Tensor& G = t.grad(self);
    detail::accumulate(t, ia, G);
    if (!t.needs_grad(ib)) return;
    if (broadcast)
      t.grad_buffer(ib).vec() += G.mat().colwise().sum().transpose();
    else
      t.grad_buffer(ib).vec() += G.vec();
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  if (a.shape() != b.shape()) throw ShapeError("sub " + shape_str(a.shape()) + " - " + shape_str(b.shape()));
  Tensor out = a.value();
  out.vec() -= b.value().vec();
  int ia = a.id, ib = b.id;
  return a.tape->push(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    detail::accumulate(t, ia, t.grad(self));
    if (t.needs_grad(ib)) t.grad_buffer(ib).vec() -= t.grad(self).vec();
  });
}

// Elementwise product of same-shape tensors.
inline Var multiply(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  if (a.shape() != b.shape()) throw ShapeError("multiply " + shape_str(a.shape()) + " * " + shape_str(b.shape()));
  Tensor out = a.value();
  out.vec().array() *= b.value().vec().array();
  int ia = a.id, ib = b.id;
  return a.tape->push(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    const auto& G = t.grad(self).vec().array();
    if (t.needs_grad(ia)) t.grad_buffer(ia).vec().array() += G * t.value(ib).vec().array();
    if (t.needs_grad(ib)) t.grad_buffer(ib).vec().array() += G * t.value(ia).vec().array();
  });
}

inline Var scale(const Var& a, double s) {
  Tensor out = a.value();
  out.vec() *= s;
  int ia = a.id;
  return a.tape->push(std::move(out), {ia}, [ia, s](Tape& t, int self) {
    if (t.needs_grad(ia)) t.grad_buffer(ia).vec() += s * t.grad(self).vec();
  });
}

inline Var relu(const Var& a) {
  Tensor out = a.value();
  out.vec() = out.vec().cwiseMax(0.0);
  int ia = a.id;
  return a.tape->push(std::move(out), {ia}, [ia](Tape& t, int self) {
    if (!t.needs_grad(ia)) return;
    const auto& x = t.value(ia).vec().array();
    t.grad_buffer(ia).vec().array() += (x > 0.0).cast<double>() * t.grad(self).vec().array();
  });
}

inline Var sum(const Var& a) {
  int ia = a.id;
  return a.tape->push(Tensor::scalar(a.value().vec().sum()), {ia}, [ia](Tape& t, int self) {
    if (t.needs_grad(ia)) t.grad_buffer(ia).vec().array() += t.grad(self).data[0];
  });
}

inline Var mean(const Var& a) {
  if (a.value().size() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

inline Var reshape(const Var& a, std::vector<int> shape) {
  if (Tensor::count(shape) != a.value().size())
    throw ShapeError("reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
  Tensor out = a.value();
  out.shape = std::move(shape);
  int ia = a.id;
  return a.tape->push(std::move(out), {ia}, [ia](Tape& t, int self) {
    if (t.needs_grad(ia)) t.grad_buffer(ia).vec() += t.grad(self).vec();
  });
}

// Mean over the last axis; the result drops that axis.
inline Var row_mean(const Var& a) {
  const Tensor& A = a.value();
  if (A.shape.empty() || A.cols() == 0) throw ShapeError("row_mean needs a nonempty last axis");
  std::vector<int> s(A.shape.begin(), A.shape.end() - 1);
  Tensor out(s);
  out.vec() = A.mat().rowwise().mean();
  int ia = a.id, c = A.cols();
  return a.tape->push(std::move(out), {ia}, [ia, c](Tape& t, int self) {
    if (!t.needs_grad(ia)) return;
    t.grad_buffer(ia).mat().colwise() += t.grad(self).vec() / static_cast<double>(c);
  });
}

// [N, C] -> [N/seg, C]: mean over consecutive blocks of seg rows.
inline Var segment_mean(const Var& a, int seg) {
  const Tensor& A = a.value();
  if (A.shape.size() != 2 || seg < 1 || A.shape[0] % seg != 0)
    throw ShapeError("segment_mean of " + shape_str(A.shape) + " by " + std::to_string(seg));
  int groups = A.shape[0] / seg, C = A.shape[1];
  Tensor out({groups, C});
  for (int g = 0; g < groups; ++g) out.mat().row(g) = A.mat().middleRows(g * seg, seg).colwise().mean();
  int ia = a.id;
  return a.tape->push(std::move(out), {ia}, [ia, seg, groups](Tape& t, int self) {
    if (!t.needs_grad(ia)) return;
    auto G = t.grad(self).mat();
    auto D = t.grad_buffer(ia).mat();
    for (int g = 0; g < groups; ++g) D.middleRows(g * seg, seg).rowwise() += G.row(g) / static_cast<double>(seg);
  });
}

// Block-diagonal graph shift: rows [g*n, (g+1)*n) of a are multiplied by
// shifts[g] (n x n). Shifts are constants.
using ShiftBatch = std::shared_ptr<const std::vector<Eigen::MatrixXd>>;

inline Var graph_shift(const Var& a, ShiftBatch shifts) {
  const Tensor& A = a.value();
  if (!shifts || shifts->empty()) throw ShapeError("graph_shift needs at least one shift");
  int n = static_cast<int>((*shifts)[0].rows());
  int B = static_cast<int>(shifts->size());
  if (A.shape.size() != 2 || A.shape[0] != B * n) throw ShapeError("graph_shift of " + shape_str(A.shape));
  for (const auto& S : *shifts)
    if (S.rows() != n || S.cols() != n) throw ShapeError("graph shifts must share one square size");
  Tensor out(A.shape);
  for (int g = 0; g < B; ++g) out.mat().middleRows(g * n, n).noalias() = (*shifts)[g] * A.mat().middleRows(g * n, n);
  int ia = a.id;
  return a.tape->push(std::move(out), {ia}, [ia, shifts, n, B](Tape& t, int self) {
    if (!t.needs_grad(ia)) return;
    auto G = t.grad(self).mat();
    auto D = t.grad_buffer(ia).mat();
    for (int g = 0; g < B; ++g) D.middleRows(g * n, n).noalias() += (*shifts)[g].transpose() * G.middleRows(g * n, n);
  });
}

// ---------------------------------------------------------------------------
// Circular convolution y[b,o,t] = bias[o] + sum_{i,s} K[o,i,s] x[b,i,(t-s) mod n],
// evaluated through a real DFT so each frequency is a few dense products.
// Spectra are stored frequency-major: row f of a (2m x rows) matrix holds the
// real parts, row m+f the imaginary parts, so one frequency of a [B, C]
// batch is a contiguous row-major B x C block.

namespace detail {

struct RealDft {
  int n = 0, m = 0;  // m = n/2 + 1 frequencies
  RowMatrix Ft;      // 2m x n: rows cos(2 pi f t/n) then -sin(2 pi f t/n)
  RowMatrix G;       // 2m x n: inverse with Hermitian weights and 1/n

  explicit RealDft(int len) : n(len), m(len / 2 + 1), Ft(2 * (len / 2 + 1), len), G(2 * (len / 2 + 1), len) {
    const double pi = std::acos(-1.0);
    for (int t = 0; t < n; ++t)
      for (int f = 0; f < m; ++f) {
        double th = 2.0 * pi * static_cast<double>((static_cast<long>(f) * t) % n) / n;
        double w = (f == 0 || 2 * f == n) ? 1.0 : 2.0;
        Ft(f, t) = std::cos(th);
        Ft(m + f, t) = -std::sin(th);
        G(f, t) = w * std::cos(th) / n;
        G(m + f, t) = -w * std::sin(th) / n;
      }
  }
};

inline const RealDft& real_dft(int n) {
  thread_local std::vector<std::unique_ptr<RealDft>> cache;
  for (const auto& d : cache)
    if (d->n == n) return *d;
  cache.push_back(std::make_unique<RealDft>(n));
  return *cache.back();
}

using BlockMap = Eigen::Map<RowMatrix>;
using ConstBlockMap = Eigen::Map<const RowMatrix>;

inline BlockMap freq_block(RowMatrix& S, int row, int r, int c) { return {S.row(row).data(), r, c}; }
inline ConstBlockMap freq_block(const RowMatrix& S, int row, int r, int c) { return {S.row(row).data(), r, c}; }

}  // namespace detail

// x: [B, I, n], K: [O, I, n], bias: [O] -> [B, O, n].
inline Var circular_conv(const Var& x, const Var& K, const Var& bias) {
  detail::same_tape(x, K);
  detail::same_tape(x, bias);
  const Tensor &X = x.value(), &Kt = K.value(), &bv = bias.value();
  if (X.shape.size() != 3 || Kt.shape.size() != 3 || X.shape[1] != Kt.shape[1] || X.shape[2] != Kt.shape[2])
    throw ShapeError("circular_conv " + shape_str(X.shape) + " with kernel " + shape_str(Kt.shape));
  if (bv.shape != std::vector<int>{Kt.shape[0]}) throw ShapeError("conv bias must have one entry per output channel");
  int B = X.shape[0], I = X.shape[1], n = X.shape[2], O = Kt.shape[0];
  const auto& dft = detail::real_dft(n);
  int m = dft.m;
  auto Xh = std::make_shared<RowMatrix>(dft.Ft * X.mat().transpose());  // 2m x (B*I)
  auto Kh = std::make_shared<RowMatrix>(dft.Ft * Kt.mat().transpose());  // 2m x (O*I)
  RowMatrix Yh(2 * m, B * O);
  for (int f = 0; f < m; ++f) {
    auto xr = detail::freq_block(*Xh, f, B, I), xi = detail::freq_block(*Xh, m + f, B, I);
    auto kr = detail::freq_block(*Kh, f, O, I), ki = detail::freq_block(*Kh, m + f, O, I);
    auto yr = detail::freq_block(Yh, f, B, O), yi = detail::freq_block(Yh, m + f, B, O);
    yr.noalias() = xr * kr.transpose();
    yr.noalias() -= xi * ki.transpose();
    yi.noalias() = xr * ki.transpose();
    yi.noalias() += xi * kr.transpose();
  }
  Tensor out({B, O, n});
  out.mat().noalias() = Yh.transpose() * dft.G;
  for (int r = 0; r < B * O; ++r) out.mat().row(r).array() += bv.data[r % O];
  int ix = x.id, ik = K.id, ib = bias.id;
  return x.tape->push(std::move(out), {ix, ik, ib}, [=](Tape& t, int self) {
    const auto& dft = detail::real_dft(n);
    auto G = t.grad(self).mat();
    if (t.needs_grad(ib)) {
      auto& gb = t.grad_buffer(ib);
      for (int r = 0; r < B * O; ++r) gb.data[r % O] += G.row(r).sum();
    }
    bool wx = t.needs_grad(ix), wk = t.needs_grad(ik);
    if (!wx && !wk) return;
    RowMatrix dYh = dft.G * G.transpose();  // 2m x (B*O)
    RowMatrix dXh(wx ? 2 * m : 0, B * I), dKh(wk ? 2 * m : 0, O * I);
    for (int f = 0; f < m; ++f) {
      auto gr = detail::freq_block(static_cast<const RowMatrix&>(dYh), f, B, O);
      auto gi = detail::freq_block(static_cast<const RowMatrix&>(dYh), m + f, B, O);
      if (wx) {
        auto kr = detail::freq_block(static_cast<const RowMatrix&>(*Kh), f, O, I);
        auto ki = detail::freq_block(static_cast<const RowMatrix&>(*Kh), m + f, O, I);
        auto dr = detail::freq_block(dXh, f, B, I), di = detail::freq_block(dXh, m + f, B, I);
        dr.noalias() = gr * kr;
        dr.noalias() += gi * ki;
        di.noalias() = gi * kr;
        di.noalias() -= gr * ki;
      }
      if (wk) {
        auto xr = detail::freq_block(static_cast<const RowMatrix&>(*Xh), f, B, I);
        auto xi = detail::freq_block(static_cast<const RowMatrix&>(*Xh), m + f, B, I);
        auto dr = detail::freq_block(dKh, f, O, I), di = detail::freq_block(dKh, m + f, O, I);
        dr.noalias() = gr.transpose() * xr;
        dr.noalias() += gi.transpose() * xi;
        di.noalias() = gi.transpose() * xr;
        di.noalias() -= gr.transpose() * xi;
      }
    }
    if (wx) t.grad_buffer(ix).mat().noalias() += dXh.transpose() * dft.Ft;
    if (wk) t.grad_buffer(ik).mat().noalias() += dKh.transpose() * dft.Ft;
  });
}

// mean((pred - target)^2).
inline Var mse_loss(const Var& pred, const Var& target) {
  Var d = sub(pred, target);
  return mean(multiply(d, d));
}

// ---------------------------------------------------------------------------
// Adam with bias correction.

struct AdamState {
  std::vector<Tensor> m, v;
  long t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps_hat = 1e-8;

  explicit AdamState(const std::vector<Tensor>& params = {}) {
    for (const auto& p : params) {
      m.emplace_back(p.shape);
      v.emplace_back(p.shape);
    }
  }
};

inline void adam_step(AdamState& st, std::vector<Tensor>& params, const std::vector<Tensor>& grads, double lr) {
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw ShapeError("parameter, gradient and state counts differ");
  ++st.t;
  double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape != grads[i].shape || params[i].shape != st.m[i].shape)
      throw ShapeError("parameter " + std::to_string(i) + " shape differs from its gradient or state");
    auto g = grads[i].vec().array();
    auto m = st.m[i].vec().array();
    auto v = st.v[i].vec().array();
    m = st.beta1 * m + (1.0 - st.beta1) * g;
    v = st.beta2 * v + (1.0 - st.beta2) * g * g;
    params[i].vec().array() -= lr * (m / c1) / ((v / c2).sqrt() + st.eps_hat);
  }
}

// ---------------------------------------------------------------------------
// Finite-difference check of d loss / d param for a scalar function built on a
// fresh tape, by central differences with step h. Returns the max over
// entries of |analytic - numeric| / max(|analytic|, |numeric|, floor).

using TapeFunction = std::function<Var(Tape&, const std::vector<Var>&)>;

inline double gradcheck(const TapeFunction& fn, std::vector<Tensor> inputs, double h = 1e-5, double floor = 1e-6) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.parameter(t));
  Var out = fn(tape, vars);
  tape.backward(out);
  std::vector<Tensor> analytic;
  for (const auto& v : vars) analytic.push_back(v.grad().size() ? v.grad() : Tensor(v.shape()));
  auto eval = [&](const std::vector<Tensor>& in) {
    Tape t2;
    std::vector<Var> vs;
    for (const auto& x : in) vs.push_back(t2.constant(x));
    return fn(t2, vs).value().item();
  };
  double worst = 0.0;
  for (std::size_t p = 0; p < inputs.size(); ++p)
    for (std::size_t j = 0; j < inputs[p].size(); ++j) {
      double x0 = inputs[p].data[j];
      inputs[p].data[j] = x0 + h;
      double fp = eval(inputs);
      inputs[p].data[j] = x0 - h;
      double fm = eval(inputs);
      inputs[p].data[j] = x0;
      double num = (fp - fm) / (2.0 * h), ana = analytic[p].data[j];
      worst = std::max(worst, std::abs(ana - num) / std::max({floor, std::abs(ana), std::abs(num)}));
    }
  return worst;
}

// ---------------------------------------------------------------------------
// Standard suite: every op on random shapes, each reduced to a scalar.

struct GradcheckRow {
  std::string op;
  std::string shapes;
  double rel_error = 0.0;
};

inline std::vector<GradcheckRow> gradcheck_suite(std::uint64_t seed, int trials = 3, double h = 1e-5) {
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  Random rng(seed);
  auto uniform = [&](std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
  };
  // Bounded away from zero so no ReLU kink lies within h of an input.
  auto signed_away = [&](std::vector<int> shape) {
    Tensor t = uniform(std::move(shape), 0.1, 1.0);
    for (double& v : t.data)
      if (rng.bit()) v = -v;
    return t;
  };
  auto square_sum = [](Var y) { return sum(multiply(y, y)); };
  std::vector<GradcheckRow> rows;
  auto run = [&](const std::string& op, const TapeFunction& fn, std::vector<Tensor> in) {
    std::string shapes;
    for (const auto& t : in) shapes += (shapes.empty() ? "" : " ") + shape_str(t.shape);
    rows.push_back({op, shapes, gradcheck(fn, std::move(in), h)});
  };
  for (int trial = 0; trial < trials; ++trial) {
    int r = rng.integer(2, 6), c = rng.integer(2, 6), k = rng.integer(2, 5), n = rng.integer(3, 8);
    run("matmul", [&](Tape&, const std::vector<Var>& v) { return square_sum(matmul(v[0], v[1])); },
        {uniform({r, k}), uniform({k, c})});
    run("add_bias", [&](Tape&, const std::vector<Var>& v) { return sum(multiply(add(v[0], v[1]), v[0])); },
        {uniform({r, c}), uniform({c})});
    run("add", [&](Tape&, const std::vector<Var>& v) { return sum(multiply(add(v[0], v[1]), v[1])); },
        {uniform({r, c}), uniform({r, c})});
    run("sub_mean", [&](Tape&, const std::vector<Var>& v) { return mean(multiply(sub(v[0], v[1]), v[0])); },
        {uniform({r, c}), uniform({r, c})});
    run("relu_multiply", [&](Tape&, const std::vector<Var>& v) { return sum(multiply(relu(v[0]), v[1])); },
        {signed_away({r, c}), uniform({r, c})});
    run("scale", [&](Tape&, const std::vector<Var>& v) { return sum(multiply(scale(v[0], -2.5), v[0])); },
        {uniform({r, c})});
    run("reshape", [&](Tape&, const std::vector<Var>& v) { return square_sum(reshape(v[0], {c, r})); },
        {uniform({r, c})});
    run("row_mean", [&](Tape&, const std::vector<Var>& v) { return square_sum(row_mean(v[0])); },
        {uniform({r, 2, c})});
    run("segment_mean", [&](Tape&, const std::vector<Var>& v) { return square_sum(segment_mean(v[0], 3)); },
        {uniform({3 * r, c})});
    auto shifts = std::make_shared<std::vector<Eigen::MatrixXd>>();
    for (int g = 0; g < r; ++g) {
      Eigen::MatrixXd S(3, 3);
      for (int i = 0; i < 9; ++i) S.data()[i] = rng.uniform(-1.0, 1.0);
      shifts->push_back(S);
    }
    ShiftBatch sb = shifts;
    run("graph_shift", [&](Tape&, const std::vector<Var>& v) { return square_sum(graph_shift(v[0], sb)); },
        {uniform({3 * r, c})});
    run("circular_conv",
        [&](Tape&, const std::vector<Var>& v) { return square_sum(circular_conv(v[0], v[1], v[2])); },
        {uniform({2, k, n}), uniform({c, k, n}), uniform({c})});
    run("mse_loss", [&](Tape& t, const std::vector<Var>& v) { return mse_loss(v[0], t.constant(Tensor({r}, 0.5))); },
        {uniform({r})});
  }
  return rows;
}

// One Adam step on L(w) = w^2 from w = 1 with lr 0.1; the first bias-corrected
// step moves by lr * sign(g) up to eps, giving 0.9.
inline double adam_hand_step() {
  std::vector<Tensor> p = {Tensor::scalar(1.0)};
  AdamState st(p);
  adam_step(st, p, {Tensor::scalar(2.0 * p[0].item())}, 0.1);
  return p[0].item();
}

}  // namespace invlab

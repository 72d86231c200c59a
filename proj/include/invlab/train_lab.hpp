#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "invlab/autodiff.hpp"
#include "invlab/common.hpp"
#include "invlab/groups_frames.hpp"
#include "invlab/hard_families.hpp"
#include "invlab/invariant_hermite.hpp"

namespace invlab {

// ---------------------------------------------------------------------------
// Configuration.

enum class ExperimentKind { GnnEr, CnnCyclic };
// Hard: the degree-count parity (GNN) or frame-averaged ridge (CNN).
// Control: a standardized linear function of the mean self-looped degree,
// rescaled to the parity labels' mean 1/2 and variance 1/4 (GNN only).
enum class TargetKind { Hard, Control };

inline const char* kind_name(ExperimentKind k) { return k == ExperimentKind::GnnEr ? "gnn-er" : "cnn-cyclic"; }
inline const char* target_name(TargetKind t) { return t == TargetKind::Hard ? "hard" : "control"; }

inline ExperimentKind parse_kind(const std::string& s) {
  if (s == "gnn-er") return ExperimentKind::GnnEr;
  if (s == "cnn-cyclic") return ExperimentKind::CnnCyclic;
  throw InvalidArgument("unknown experiment kind '" + s + "'");
}

inline TargetKind parse_target(const std::string& s) {
  if (s == "hard") return TargetKind::Hard;
  if (s == "control") return TargetKind::Control;
  throw InvalidArgument("unknown target '" + s + "'");
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::GnnEr;
  TargetKind target = TargetKind::Hard;
  int n = 15;
  int train_size = 225;
  int test_size = 1000;
  int epochs = 1000;
  int batch = 32;
  double lr = 3e-3;
  std::uint64_t seed = 0;
  int conv_layers = 3;
  int channels = 32;
  int mlp_width = 64;
  int ridge_k = 10;
  int lr_halve_every = 200;  // 0 disables the schedule
  int eval_every = 10;
  int invariance_every = 100;

  void validate() const {
    if (n < 2) throw InvalidArgument("n must be >= 2");
    if (train_size < 1 || test_size < 1 || epochs < 1 || batch < 1) throw InvalidArgument("sizes must be positive");
    if (conv_layers < 1 || channels < 1 || mlp_width < 1) throw InvalidArgument("architecture sizes must be positive");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("lr must be positive");
    if (lr_halve_every < 0 || eval_every < 1 || invariance_every < 0) throw InvalidArgument("bad schedule");
    if (kind == ExperimentKind::CnnCyclic && target == TargetKind::Control)
      throw InvalidArgument("the control target is defined for graphs only");
    if (kind == ExperimentKind::CnnCyclic && ridge_k < 1) throw InvalidArgument("ridge_k must be >= 1");
  }

  static ExperimentConfig paper_gnn(std::uint64_t seed = 0) {
    ExperimentConfig c;
    c.seed = seed;
    return c;
  }
  static ExperimentConfig control_gnn(std::uint64_t seed = 0) {
    ExperimentConfig c = paper_gnn(seed);
    c.target = TargetKind::Control;
    return c;
  }
  static ExperimentConfig paper_cnn(std::uint64_t seed = 0) {
    ExperimentConfig c;
    c.kind = ExperimentKind::CnnCyclic;
    c.n = 50;
    c.train_size = 500;
    c.test_size = 2000;
    c.epochs = 200;
    c.lr = 1e-4;
    c.channels = 100;
    c.mlp_width = 100;
    c.seed = seed;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Datasets.

struct Dataset {
  ExperimentKind kind = ExperimentKind::GnnEr;
  int n = 0;
  std::vector<Adjacency> graphs;      // GNN inputs
  std::vector<Eigen::MatrixXd> shifts;  // normalized shifts of graphs
  RowMatrix inputs;                   // CNN inputs, one row per sample
  std::vector<double> labels;

  int size() const { return static_cast<int>(labels.size()); }
  double label_variance() const {
    if (labels.empty()) return 0.0;
    double mu = std::accumulate(labels.begin(), labels.end(), 0.0) / size();
    double s = 0.0;
    for (double y : labels) s += (y - mu) * (y - mu);
    return s / size();
  }
};

// The target drawn for one experiment seed.
struct ExperimentTarget {
  ExperimentKind kind = ExperimentKind::GnnEr;
  TargetKind target = TargetKind::Hard;
  int n = 0;
  DegreeCountParity parity;
  std::shared_ptr<FrameAveragedRidge> ridge;

  double operator()(const Adjacency& A) const {
    if (target == TargetKind::Hard) return eval_gSb(parity, A);
    // Self-looped degree as the normalized shift sees it: 1 + off-diagonal row sum.
    double mean_deg = 0.0;
    for (int v = 0; v < n; ++v) {
      double d = 1.0;
      for (int u = 0; u < n; ++u)
        if (u != v && A(v, u) != 0) d += 1.0;
      mean_deg += d / n;
    }
    double mu = 1.0 + (n - 1) / 2.0, sd = std::sqrt((n - 1) / (4.0 * n));
    return 0.5 + 0.5 * (mean_deg - mu) / sd;
  }
  double operator()(const Eigen::VectorXd& x) const { return (*ridge)(Eigen::MatrixXd(x)); }
};

// Stream 0 of the seed draws the target. GNN: S uniform of size floor(n/2)
// from [n+1] and b uniform. CNN: B from QR of an n x 2 Gaussian, labels
// summed over the cyclic group and divided by sqrt(|G|) only.
inline ExperimentTarget draw_target(ExperimentKind kind, TargetKind target, int n, int ridge_k, std::uint64_t seed) {
  Random rng(seed, 0);
  ExperimentTarget t;
  t.kind = kind;
  t.target = target;
  t.n = n;
  if (kind == ExperimentKind::GnnEr) {
    t.parity = random_degree_count_parity(rng, n, n / 2);
  } else {
    t.ridge = std::make_shared<FrameAveragedRidge>(ridge_k, random_two_frame(rng, n), cyclic_group(n), Activation::ReLU,
                                                   1.0);
  }
  return t;
}

inline Dataset sample_dataset(const ExperimentTarget& t, int size, Random& rng) {
  if (size < 1) throw InvalidArgument("dataset size must be >= 1");
  Dataset ds;
  ds.kind = t.kind;
  ds.n = t.n;
  ds.labels.reserve(size);
  if (t.kind == ExperimentKind::GnnEr) {
    for (int s = 0; s < size; ++s) {
      Adjacency A(t.n, t.n);
      for (int i = 0; i < t.n; ++i)
        for (int j = 0; j < t.n; ++j) A(i, j) = rng.bit() ? 1 : 0;
      ds.labels.push_back(t(A));
      ds.shifts.push_back(normalize_shift(A).matrix);
      ds.graphs.push_back(std::move(A));
    }
  } else {
    ds.inputs.resize(size, t.n);
    for (int s = 0; s < size; ++s) {
      for (int j = 0; j < t.n; ++j) ds.inputs(s, j) = rng.normal();
      ds.labels.push_back(t(Eigen::VectorXd(ds.inputs.row(s).transpose())));
    }
  }
  return ds;
}

// Training split from stream 1, test split from stream 2.
inline Dataset make_dataset(ExperimentKind kind, int n, int size, std::uint64_t seed, TargetKind target = TargetKind::Hard,
                            int ridge_k = 10) {
  auto t = draw_target(kind, target, n, ridge_k, seed);
  Random rng(seed, 1);
  return sample_dataset(t, size, rng);
}

// ---------------------------------------------------------------------------
// Models.
//
// GNN layer: H' = relu(gamma * S H W + H R + b), S the normalized shift and
// gamma = (expected self-looped degree)^{-1/2} = ((n+1)/2)^{-1/2}. Then mean
// node pooling and a two-layer ReLU MLP.
// CNN layer: H' = relu(circular_conv(H, K) + b) with full-length kernels. Then
// global average pooling and a two-layer ReLU MLP.

struct Model {
  ExperimentKind kind = ExperimentKind::GnnEr;
  int n = 0, conv_layers = 0, channels = 0, mlp_width = 0;
  double shift_gain = 1.0;
  std::vector<Tensor> params;
  std::vector<std::string> names;

  std::size_t parameter_count() const {
    std::size_t c = 0;
    for (const auto& p : params) c += p.size();
    return c;
  }
};

inline std::size_t closed_form_parameter_count(const ExperimentConfig& c) {
  std::size_t C = c.channels, W = c.mlp_width, total = 0;
  for (int l = 0; l < c.conv_layers; ++l) {
    std::size_t in = l == 0 ? 1 : C;
    total += c.kind == ExperimentKind::GnnEr ? 2 * in * C + C : in * C * static_cast<std::size_t>(c.n) + C;
  }
  return total + C * W + W + W + 1;
}

inline Model build_model(const ExperimentConfig& cfg) {
  cfg.validate();
  Model m;
  m.kind = cfg.kind;
  m.n = cfg.n;
  m.conv_layers = cfg.conv_layers;
  m.channels = cfg.channels;
  m.mlp_width = cfg.mlp_width;
  m.shift_gain = 1.0 / std::sqrt((cfg.n + 1) / 2.0);
  Random rng(cfg.seed, 3);
  auto uniform = [&](std::vector<int> shape, double fan_in, const std::string& name) {
    Tensor t(std::move(shape));
    double b = 1.0 / std::sqrt(fan_in);
    for (double& v : t.data) v = rng.uniform(-b, b);
    m.params.push_back(std::move(t));
    m.names.push_back(name);
  };
  int C = cfg.channels;
  for (int l = 0; l < cfg.conv_layers; ++l) {
    int in = l == 0 ? 1 : C;
    std::string tag = "conv" + std::to_string(l);
    if (cfg.kind == ExperimentKind::GnnEr) {
      uniform({in, C}, in, tag + ".shift");
      uniform({in, C}, in, tag + ".root");
      uniform({C}, in, tag + ".bias");
    } else {
      uniform({C, in, cfg.n}, static_cast<double>(in) * cfg.n, tag + ".kernel");
      uniform({C}, static_cast<double>(in) * cfg.n, tag + ".bias");
    }
  }
  uniform({C, cfg.mlp_width}, C, "mlp0.weight");
  uniform({cfg.mlp_width}, C, "mlp0.bias");
  uniform({cfg.mlp_width, 1}, cfg.mlp_width, "mlp1.weight");
  uniform({1}, cfg.mlp_width, "mlp1.bias");
  return m;
}

// Rows [first, first+count) of a dataset as model input.
struct Batch {
  int size = 0;
  ShiftBatch shifts;
  Tensor x;
  Tensor y;
};

inline Batch make_batch(const Dataset& ds, const std::vector<int>& idx) {
  Batch b;
  b.size = static_cast<int>(idx.size());
  b.y = Tensor({b.size});
  for (int i = 0; i < b.size; ++i) b.y.data[i] = ds.labels[idx[i]];
  if (ds.kind == ExperimentKind::GnnEr) {
    auto s = std::make_shared<std::vector<Eigen::MatrixXd>>();
    s->reserve(idx.size());
    for (int i : idx) s->push_back(ds.shifts[i]);
    b.shifts = s;
    b.x = Tensor({b.size * ds.n, 1}, 1.0);
  } else {
    b.x = Tensor({b.size, 1, ds.n});
    for (int i = 0; i < b.size; ++i)
      for (int j = 0; j < ds.n; ++j) b.x.data[i * ds.n + j] = ds.inputs(idx[i], j);
  }
  return b;
}

// Scalar prediction per batch element, shape [B].
inline Var forward(const Model& m, Tape& tape, const std::vector<Var>& p, const Batch& b) {
  Var h = tape.constant(b.x);
  std::size_t k = 0;
  for (int l = 0; l < m.conv_layers; ++l) {
    if (m.kind == ExperimentKind::GnnEr) {
      Var agg = scale(graph_shift(matmul(h, p[k]), b.shifts), m.shift_gain);
      h = relu(add(add(agg, matmul(h, p[k + 1])), p[k + 2]));
      k += 3;
    } else {
      h = relu(circular_conv(h, p[k], p[k + 1]));
      k += 2;
    }
  }
  Var pooled = m.kind == ExperimentKind::GnnEr ? segment_mean(h, m.n) : row_mean(h);
  Var z = relu(add(matmul(pooled, p[k]), p[k + 1]));
  Var out = add(matmul(z, p[k + 2]), p[k + 3]);
  return reshape(out, {b.size});
}

inline std::vector<double> predict(const Model& m, const Dataset& ds, int chunk = 256) {
  std::vector<double> out;
  out.reserve(ds.size());
  for (int first = 0; first < ds.size(); first += chunk) {
    std::vector<int> idx;
    for (int i = first; i < std::min(ds.size(), first + chunk); ++i) idx.push_back(i);
    Batch b = make_batch(ds, idx);
    Tape tape;
    std::vector<Var> p;
    for (const auto& t : m.params) p.push_back(tape.constant(t));
    Var y = forward(m, tape, p, b);
    out.insert(out.end(), y.value().data.begin(), y.value().data.end());
  }
  return out;
}

// Prediction on a single GNN input (adjacency) or CNN input (vector).
inline double predict_graph(const Model& m, const Adjacency& A) {
  Dataset ds;
  ds.kind = ExperimentKind::GnnEr;
  ds.n = static_cast<int>(A.rows());
  ds.graphs = {A};
  ds.shifts = {normalize_shift(A).matrix};
  ds.labels = {0.0};
  return predict(m, ds)[0];
}

inline double predict_signal(const Model& m, const Eigen::VectorXd& x) {
  Dataset ds;
  ds.kind = ExperimentKind::CnnCyclic;
  ds.n = static_cast<int>(x.size());
  ds.inputs = x.transpose();
  ds.labels = {0.0};
  return predict(m, ds)[0];
}

struct Metrics {
  double mse = 0.0;
  double accuracy = 0.0;  // threshold 0.5 on prediction and label
};

inline Metrics evaluate(const Model& m, const Dataset& ds) {
  auto pred = predict(m, ds);
  Metrics r;
  for (int i = 0; i < ds.size(); ++i) {
    double d = pred[i] - ds.labels[i];
    r.mse += d * d;
    r.accuracy += ((pred[i] > 0.5) == (ds.labels[i] > 0.5)) ? 1.0 : 0.0;
  }
  r.mse /= ds.size();
  r.accuracy /= ds.size();
  return r;
}

// Largest |f(g x) - f(x)| over `trials` inputs from ds and random g: node
// relabelings for graphs, cyclic shifts for signals.
inline double invariance_deviation(const Model& m, const Dataset& ds, int trials, std::uint64_t seed) {
  Random rng(seed, 7);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    int i = rng.integer(0, ds.size() - 1);
    if (ds.kind == ExperimentKind::GnnEr) {
      std::vector<int> img(ds.n);
      std::iota(img.begin(), img.end(), 0);
      std::shuffle(img.begin(), img.end(), rng.engine());
      worst = std::max(worst, std::abs(predict_graph(m, permute_adjacency(ds.graphs[i], img)) -
                                       predict_graph(m, ds.graphs[i])));
    } else {
      int s = rng.integer(1, ds.n - 1);
      Eigen::VectorXd x = ds.inputs.row(i).transpose(), y(ds.n);
      for (int j = 0; j < ds.n; ++j) y[(j + s) % ds.n] = x[j];
      worst = std::max(worst, std::abs(predict_signal(m, y) - predict_signal(m, x)));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Training.

struct CurveRow {
  int epoch = 0;
  double train_mse = 0.0, train_acc = 0.0, test_mse = 0.0, test_acc = 0.0, lr = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<CurveRow> curve;
  double label_variance = 0.0;  // of the test labels
  double invariance_max_dev = 0.0;
  int invariance_checks = 0;
  std::size_t parameters = 0;

  const CurveRow& final_row() const { return curve.back(); }
};

inline constexpr double kDivergenceLoss = 1e6;

inline double scheduled_lr(const ExperimentConfig& c, int epoch) {
  if (c.lr_halve_every == 0) return c.lr;
  return c.lr * std::pow(0.5, static_cast<double>((epoch - 1) / c.lr_halve_every));
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  auto target = draw_target(cfg.kind, cfg.target, cfg.n, cfg.ridge_k, cfg.seed);
  Random data_rng(cfg.seed, 1), test_rng(cfg.seed, 2), order_rng(cfg.seed, 4);
  Dataset train = sample_dataset(target, cfg.train_size, data_rng);
  Dataset test = sample_dataset(target, cfg.test_size, test_rng);
  Model model = build_model(cfg);
  AdamState adam(model.params);

  ExperimentResult res;
  res.config = cfg;
  res.label_variance = test.label_variance();
  res.parameters = model.parameter_count();

  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double lr = scheduled_lr(cfg, epoch);
    std::shuffle(order.begin(), order.end(), order_rng.engine());
    for (int first = 0; first < train.size(); first += cfg.batch) {
      std::vector<int> idx(order.begin() + first, order.begin() + std::min(train.size(), first + cfg.batch));
      Batch b = make_batch(train, idx);
      Tape tape;
      std::vector<Var> p;
      for (const auto& t : model.params) p.push_back(tape.parameter(t));
      Var loss = mse_loss(forward(model, tape, p, b), tape.constant(b.y));
      double lv = loss.value().item();
      if (!std::isfinite(lv) || lv > kDivergenceLoss)
        throw Diverged("loss " + std::to_string(lv) + " at epoch " + std::to_string(epoch));
      tape.backward(loss);
      std::vector<Tensor> grads;
      for (const auto& v : p) grads.push_back(v.grad());
      adam_step(adam, model.params, grads, lr);
    }
    if (epoch == 1 || epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      Metrics tr = evaluate(model, train), te = evaluate(model, test);
      res.curve.push_back({epoch, tr.mse, tr.accuracy, te.mse, te.accuracy, lr});
    }
    if (cfg.invariance_every > 0 && epoch % cfg.invariance_every == 0) {
      res.invariance_max_dev =
          std::max(res.invariance_max_dev, invariance_deviation(model, test, 4, cfg.seed + static_cast<std::uint64_t>(epoch)));
      ++res.invariance_checks;
    }
  }
  return res;
}

// CSV: epoch,train_mse,train_acc,test_mse,test_acc,lr. Accuracy cells are
// empty for the CNN, whose targets are real-valued.
inline void write_curve_csv(std::ostream& os, const ExperimentResult& r) {
  bool acc = r.config.kind == ExperimentKind::GnnEr;
  os << "epoch,train_mse,train_acc,test_mse,test_acc,lr\n";
  os.precision(10);
  for (const auto& row : r.curve) {
    os << row.epoch << ',' << row.train_mse << ',';
    if (acc) os << row.train_acc;
    os << ',' << row.test_mse << ',';
    if (acc) os << row.test_acc;
    os << ',' << row.lr << '\n';
  }
}

// ---------------------------------------------------------------------------
// Acceptance verdicts.

inline constexpr double kGnnFailureAccuracy = 0.75;
inline constexpr double kCnnFitMse = 1e-2;
inline constexpr double kCnnGeneralizationRatio = 0.25;
inline constexpr double kControlMse = 1e-3;

inline bool gnn_failed_to_fit(const ExperimentResult& r) { return r.final_row().train_acc <= kGnnFailureAccuracy; }

inline bool cnn_overfit(const ExperimentResult& r) {
  return r.final_row().train_mse < kCnnFitMse && r.final_row().test_mse >= kCnnGeneralizationRatio * r.label_variance;
}

inline bool control_learned(const ExperimentResult& r) {
  return r.final_row().train_mse < kControlMse && r.final_row().test_mse < kControlMse;
}

// Learning-rate grid search: the lr with the lowest final train MSE.
struct LrTrial {
  double lr = 0.0;
  double train_mse = 0.0;
  bool diverged = false;
};

inline std::vector<LrTrial> tune_lr(ExperimentConfig cfg, const std::vector<double>& grid) {
  if (grid.empty()) throw InvalidArgument("empty lr grid");
  std::vector<LrTrial> out;
  for (double lr : grid) {
    cfg.lr = lr;
    LrTrial t{lr, std::numeric_limits<double>::infinity(), false};
    try {
      t.train_mse = run_experiment(cfg).final_row().train_mse;
    } catch (const Diverged&) {
      t.diverged = true;
    }
    out.push_back(t);
  }
  return out;
}

inline double best_lr(const std::vector<LrTrial>& trials) {
  auto it = std::min_element(trials.begin(), trials.end(),
                             [](const LrTrial& a, const LrTrial& b) { return a.train_mse < b.train_mse; });
  return it->lr;
}

}  // namespace invlab

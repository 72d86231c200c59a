#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "invlab/train_lab.hpp"

using namespace invlab;

namespace {

ExperimentConfig tiny_gnn(std::uint64_t seed = 1) {
  ExperimentConfig c = ExperimentConfig::paper_gnn(seed);
  c.n = 6;
  c.train_size = 40;
  c.test_size = 40;
  c.epochs = 20;
  c.channels = 4;
  c.mlp_width = 8;
  c.eval_every = 5;
  c.invariance_every = 10;
  return c;
}

ExperimentConfig tiny_cnn(std::uint64_t seed = 1) {
  ExperimentConfig c = ExperimentConfig::paper_cnn(seed);
  c.n = 8;
  c.ridge_k = 3;
  c.train_size = 40;
  c.test_size = 40;
  c.epochs = 10;
  c.channels = 3;
  c.mlp_width = 5;
  c.eval_every = 5;
  c.invariance_every = 5;
  return c;
}

}  // namespace

TEST(Config, PaperDefaults) {
  auto g = ExperimentConfig::paper_gnn();
  EXPECT_EQ(g.n, 15);
  EXPECT_EQ(g.train_size, 225);
  EXPECT_EQ(g.epochs, 1000);
  EXPECT_EQ(g.conv_layers, 3);
  EXPECT_EQ(g.channels, 32);
  EXPECT_EQ(g.mlp_width, 64);
  auto c = ExperimentConfig::paper_cnn();
  EXPECT_EQ(c.n, 50);
  EXPECT_EQ(c.ridge_k, 10);
  EXPECT_EQ(c.train_size, 500);
  EXPECT_EQ(c.test_size, 2000);
  EXPECT_EQ(c.batch, 32);
  EXPECT_EQ(c.channels, 100);
  EXPECT_EQ(c.mlp_width, 100);
  EXPECT_EQ(c.lr_halve_every, 200);
  auto bad = c;
  bad.target = TargetKind::Control;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  EXPECT_EQ(parse_kind("cnn-cyclic"), ExperimentKind::CnnCyclic);
  EXPECT_THROW(parse_kind("mlp"), InvalidArgument);
}

TEST(Model, ParameterCountMatchesClosedForm) {
  // GNN: 3 layers of (shift, root, bias), then 32 -> 64 -> 1.
  auto g = ExperimentConfig::paper_gnn();
  EXPECT_EQ(closed_form_parameter_count(g), 6433u);
  EXPECT_EQ(build_model(g).parameter_count(), 6433u);
  // CNN: kernels 1x100x50 and 2 x 100x100x50 with biases, then 100 -> 100 -> 1.
  auto c = ExperimentConfig::paper_cnn();
  EXPECT_EQ(closed_form_parameter_count(c), 1015501u);
  EXPECT_EQ(build_model(c).parameter_count(), 1015501u);
  EXPECT_EQ(build_model(tiny_cnn()).parameter_count(), closed_form_parameter_count(tiny_cnn()));
}

TEST(Model, GnnIsNodePermutationInvariant) {
  auto cfg = ExperimentConfig::paper_gnn(3);
  Model m = build_model(cfg);
  Dataset ds = make_dataset(ExperimentKind::GnnEr, cfg.n, 5, 3);
  Random rng(9);
  for (int i = 0; i < ds.size(); ++i) {
    std::vector<int> img(cfg.n);
    std::iota(img.begin(), img.end(), 0);
    std::shuffle(img.begin(), img.end(), rng.engine());
    EXPECT_NEAR(predict_graph(m, permute_adjacency(ds.graphs[i], img)), predict_graph(m, ds.graphs[i]), 1e-9);
  }
  EXPECT_LT(invariance_deviation(m, ds, 5, 1), 1e-9);
}

TEST(Model, CnnIsShiftInvariant) {
  auto cfg = ExperimentConfig::paper_cnn(3);
  cfg.channels = 8;
  cfg.mlp_width = 8;
  Model m = build_model(cfg);
  Random rng(4);
  Eigen::VectorXd x(cfg.n), y(cfg.n);
  for (int j = 0; j < cfg.n; ++j) x[j] = rng.normal();
  for (int s : {1, 7, 49}) {
    for (int j = 0; j < cfg.n; ++j) y[(j + s) % cfg.n] = x[j];
    EXPECT_NEAR(predict_signal(m, y), predict_signal(m, x), 1e-9);
  }
}

TEST(Dataset, GnnLabelsAreNearlyBalanced) {
  Dataset ds = make_dataset(ExperimentKind::GnnEr, 15, 10000, 11);
  double ones = std::accumulate(ds.labels.begin(), ds.labels.end(), 0.0) / ds.size();
  EXPECT_NEAR(ones, 0.5, 0.1);
  for (double y : ds.labels) EXPECT_TRUE(y == 0.0 || y == 1.0);
}

TEST(Dataset, IdenticalSeedsGiveIdenticalData) {
  Dataset a = make_dataset(ExperimentKind::GnnEr, 7, 30, 5), b = make_dataset(ExperimentKind::GnnEr, 7, 30, 5);
  EXPECT_EQ(a.labels, b.labels);
  for (int i = 0; i < a.size(); ++i) EXPECT_EQ(a.graphs[i], b.graphs[i]);
  Dataset c = make_dataset(ExperimentKind::CnnCyclic, 12, 20, 5, TargetKind::Hard, 3);
  Dataset d = make_dataset(ExperimentKind::CnnCyclic, 12, 20, 5, TargetKind::Hard, 3);
  EXPECT_EQ(c.labels, d.labels);
  EXPECT_EQ(c.inputs, d.inputs);
}

TEST(Dataset, CnnLabelsAreShiftInvariant) {
  auto t = draw_target(ExperimentKind::CnnCyclic, TargetKind::Hard, 50, 10, 2);
  Random rng(3);
  Eigen::VectorXd x(50), y(50);
  for (int j = 0; j < 50; ++j) x[j] = rng.normal();
  for (int s : {1, 13, 25}) {
    for (int j = 0; j < 50; ++j) y[(j + s) % 50] = x[j];
    EXPECT_NEAR(t(y), t(x), 1e-10);
  }
}

TEST(Dataset, ControlTargetIsStandardizedMeanDegree) {
  auto t = draw_target(ExperimentKind::GnnEr, TargetKind::Control, 15, 10, 0);
  // Empty graph: every self-looped degree is 1.
  double mu = 8.0, sd = std::sqrt(14.0 / 60.0);
  EXPECT_NEAR(t(Adjacency(Adjacency::Zero(15, 15))), 0.5 + 0.5 * (1.0 - mu) / sd, 1e-12);
  // Diagonal entries do not count: the shift adds its own self-loops.
  EXPECT_NEAR(t(Adjacency(Adjacency::Identity(15, 15))), t(Adjacency(Adjacency::Zero(15, 15))), 1e-12);
  Dataset ds = make_dataset(ExperimentKind::GnnEr, 15, 20000, 4, TargetKind::Control);
  EXPECT_NEAR(ds.label_variance(), 0.25, 0.02);
}

TEST(Training, LearningRateSchedule) {
  auto c = ExperimentConfig::paper_cnn();
  EXPECT_EQ(scheduled_lr(c, 1), 1e-4);
  EXPECT_EQ(scheduled_lr(c, 200), 1e-4);
  EXPECT_EQ(scheduled_lr(c, 201), 5e-5);
  EXPECT_EQ(scheduled_lr(c, 401), 2.5e-5);
  c.lr_halve_every = 0;
  EXPECT_EQ(scheduled_lr(c, 1000), 1e-4);
}

TEST(Training, RunsAreBitwiseDeterministic) {
  for (const auto& cfg : {tiny_gnn(), tiny_cnn()}) {
    auto a = run_experiment(cfg), b = run_experiment(cfg);
    std::ostringstream sa, sb;
    write_curve_csv(sa, a);
    write_curve_csv(sb, b);
    EXPECT_EQ(sa.str(), sb.str());
    ASSERT_EQ(a.curve.size(), b.curve.size());
    for (std::size_t i = 0; i < a.curve.size(); ++i) EXPECT_EQ(a.curve[i].train_mse, b.curve[i].train_mse);
    EXPECT_EQ(a.invariance_checks, cfg.epochs / cfg.invariance_every);
    EXPECT_LT(a.invariance_max_dev, 1e-9);
  }
}

TEST(Training, CurveCsvLayout) {
  auto r = run_experiment(tiny_gnn());
  std::ostringstream os;
  write_curve_csv(os, r);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "epoch,train_mse,train_acc,test_mse,test_acc,lr");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 5);  // epochs 1, 5, 10, 15, 20
  EXPECT_EQ(r.curve.front().epoch, 1);
  EXPECT_EQ(r.final_row().epoch, 20);

  auto c = run_experiment(tiny_cnn());
  std::ostringstream oc;
  write_curve_csv(oc, c);
  EXPECT_NE(oc.str().find(",,"), std::string::npos);  // empty accuracy cells
}

TEST(Training, HugeLearningRateDiverges) {
  auto cfg = tiny_gnn();
  cfg.lr = 1e4;
  cfg.epochs = 50;
  EXPECT_THROW(run_experiment(cfg), Diverged);
}

TEST(Training, SmallControlTargetTrains) {
  auto cfg = tiny_gnn(2);
  cfg.target = TargetKind::Control;
  cfg.epochs = 200;
  cfg.eval_every = 200;
  cfg.channels = 8;
  cfg.mlp_width = 16;
  auto r = run_experiment(cfg);
  EXPECT_LT(r.final_row().train_mse, 0.1 * r.curve.front().train_mse);
}

TEST(Training, LrGridPicksLowestTrainLoss) {
  auto cfg = tiny_gnn();
  cfg.target = TargetKind::Control;
  auto trials = tune_lr(cfg, {1e-4, 3e-3});
  ASSERT_EQ(trials.size(), 2u);
  double best = trials[0].train_mse < trials[1].train_mse ? 1e-4 : 3e-3;
  EXPECT_EQ(best_lr(trials), best);
  EXPECT_THROW(tune_lr(cfg, {}), InvalidArgument);
}

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "causalsoil/bench.hpp"
#include "causalsoil/error.hpp"
#include "causalsoil/gnn.hpp"
#include "causalsoil/rng.hpp"
#include "causalsoil/scm.hpp"

using namespace causalsoil;
using namespace causalsoil::gnn;

namespace {

Tensor random_tensor(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) t(i, j) = u(rng);
  }
  return t;
}

std::vector<std::string> node_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("v" + std::to_string(i));
  return out;
}

// Random DAG over v0..v{n-1} (edges only from lower to higher index).
GraphSkeleton random_skeleton_dag(std::size_t n, double p, std::size_t target, Rng& rng) {
  std::bernoulli_distribution coin(p);
  graph::EdgeList edges;
  const auto names = node_names(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (coin(rng)) edges.push_back({names[i], names[j], 1.0});
    }
  }
  return GraphSkeleton::from_edges(names, edges, names[target]);
}

Table small_table(const std::vector<std::string>& names, const std::string& target, std::size_t rows,
                  std::uint64_t seed) {
  std::vector<ColumnSpec> cols;
  for (const auto& n : names) {
    ColumnSpec c;
    c.name = n;
    cols.push_back(c);
  }
  Table t;
  t.schema = Schema(cols, target);
  Rng rng(seed);
  t.values = random_tensor(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(names.size()), rng);
  for (std::size_t r = 0; r < rows; ++r) {
    t.field_ids.push_back("f");
    t.dates.push_back(Date{static_cast<int>(r)});
    t.treatments.push_back("red");
  }
  t.interventions.assign(rows, {});
  return t;
}

double naive_relu(double v) { return v > 0 ? v : 0.0; }

}  // namespace

TEST(Skeleton, ValidationErrors) {
  const std::vector<std::string> names{"a", "b", "y"};
  EXPECT_THROW(GraphSkeleton::from_edges(names, {}, "z"), SchemaError);
  EXPECT_THROW(GraphSkeleton::from_edges(names, {{"a", "q", 1.0}}, "y"), SchemaError);
  EXPECT_THROW(GraphSkeleton::from_edges(names, {{"a", "a", 1.0}}, "y"), SchemaError);
  EXPECT_THROW(GraphSkeleton::from_edges({"a", "a", "y"}, {}, "y"), SchemaError);
  const auto s = GraphSkeleton::from_edges(names, {{"a", "y", 1.0}, {"b", "y", 1.0}}, "y");
  EXPECT_EQ(s.target, 2u);
  EXPECT_EQ(s.index_of("b"), 1u);
  EXPECT_THROW(s.index_of("q"), SchemaError);
}

TEST(Skeleton, NeighborhoodsFromDag) {
  const auto dag = graph::Dag::from_edges({"a", "b", "c", "y"}, {{"a", "b"}, {"b", "y"}, {"c", "y"}});
  const auto s = GraphSkeleton::from_dag(dag, {"y", "c", "b", "a", "extra"}, "y");
  const auto nb = in_neighbors(s);
  EXPECT_EQ(nb[0], (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(nb[2], (std::vector<std::size_t>{3}));
  EXPECT_TRUE(nb[4].empty());
  const auto anc = ancestor_neighbors(s);
  EXPECT_EQ(anc[0], (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_TRUE(anc[3].empty());
}

TEST(Instances, TargetMaskedAndColumnsAlignedByName) {
  const auto t = small_table({"y", "a", "b"}, "y", 6, 3);
  const auto s = GraphSkeleton::from_edges({"a", "b", "y"}, {{"a", "y", 1.0}}, "y");
  const auto inst = build_instances(t, s);
  ASSERT_EQ(inst.size(), 6u);
  for (std::size_t r = 0; r < inst.size(); ++r) {
    const auto rr = static_cast<Eigen::Index>(r);
    EXPECT_EQ(inst[r].x(0), t.values(rr, 1));
    EXPECT_EQ(inst[r].x(1), t.values(rr, 2));
    EXPECT_EQ(inst[r].x(2), 0.0);
    EXPECT_EQ(inst[r].label, t.values(rr, 0));
    EXPECT_EQ(inst[r].date.days, static_cast<int>(r));
  }
  const auto x = stack_features(inst);
  EXPECT_EQ(x.rows(), 3);
  EXPECT_EQ(x.cols(), 6);
  EXPECT_EQ(stack_labels(inst)(4), t.values(4, 0));
}

TEST(Instances, SchemaMismatchesThrow) {
  const auto s = GraphSkeleton::from_edges({"a", "b", "y"}, {}, "y");
  EXPECT_THROW(build_instances(small_table({"a", "y"}, "y", 3, 1), s), SchemaError);
  EXPECT_THROW(build_instances(small_table({"a", "b", "c", "y"}, "y", 3, 1), s), SchemaError);
  auto t = small_table({"a", "b", "y"}, "y", 3, 1);
  t.values(1, 0) = std::nan("");
  EXPECT_THROW(build_instances(t, s), SchemaError);
  // A non-finite target is masked, so it does not block the features.
  auto u = small_table({"a", "b", "y"}, "y", 3, 1);
  u.values(1, 2) = std::nan("");
  EXPECT_NO_THROW(build_instances(u, s));
}

TEST(SageConv, ZeroWeightsGiveBias) {
  Rng rng(5);
  const auto s = random_skeleton_dag(5, 0.5, 4, rng);
  diff::DenseParams p("s", 6, 2);
  p.weight.value.setZero();
  p.bias.value << 0.25, -0.5;
  std::vector<Tensor> h;
  for (int i = 0; i < 5; ++i) h.push_back(random_tensor(3, 4, rng));
  const auto lin = sage_conv(h, in_neighbors(s), p, false);
  const auto act = sage_conv(h, in_neighbors(s), p, true);
  for (int i = 0; i < 5; ++i) {
    for (Eigen::Index c = 0; c < 4; ++c) {
      EXPECT_EQ(lin[i](0, c), 0.25);
      EXPECT_EQ(lin[i](1, c), -0.5);
      EXPECT_EQ(act[i](1, c), 0.0);
    }
  }
}

TEST(SageConv, IsolatedNodeKeepsSelfPath) {
  const auto s = GraphSkeleton::from_edges({"a", "b", "y"}, {{"a", "y", 1.0}}, "y");
  diff::DenseParams p("s", 4, 2);
  p.weight.value << 1, 0, 1, 0, 0, 1, 0, 1;  // [I | I]
  p.bias.value.setZero();
  std::vector<Tensor> h(3, Tensor(2, 1));
  h[0] << 1, 2;
  h[1] << -3, 4;
  h[2] << 5, 6;
  const auto out = sage_conv(h, in_neighbors(s), p, false);
  EXPECT_EQ(out[1], h[1]);
  EXPECT_EQ(out[2], h[2] + h[0]);
}

TEST(SageConv, MatchesNaiveLoops) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(derive_seed(seed, 11));
    const std::size_t n = 3 + seed % 6;
    const auto s = random_skeleton_dag(n, 0.5, n - 1, rng);
    const auto nb = in_neighbors(s);
    const Eigen::Index din = 3, dout = 4, batch = 5;
    diff::DenseParams p("s", 2 * din, dout);
    p.weight.value = random_tensor(dout, 2 * din, rng);
    p.bias.value = random_tensor(dout, 1, rng);
    std::vector<Tensor> h;
    for (std::size_t i = 0; i < n; ++i) h.push_back(random_tensor(din, batch, rng));
    const auto got = sage_conv(h, nb, p, true);
    for (std::size_t i = 0; i < n; ++i) {
      for (Eigen::Index b = 0; b < batch; ++b) {
        for (Eigen::Index o = 0; o < dout; ++o) {
          double z = p.bias.value(o, 0);
          for (Eigen::Index k = 0; k < din; ++k) {
            z += p.weight.value(o, k) * h[i](k, b);
            double m = 0.0;
            for (auto u : nb[i]) m += h[u](k, b);
            if (!nb[i].empty()) m /= static_cast<double>(nb[i].size());
            z += p.weight.value(o, din + k) * m;
          }
          EXPECT_NEAR(got[i](o, b), naive_relu(z), 1e-12) << "seed " << seed << " node " << i;
        }
      }
    }
  }
}

TEST(EccConv, EmptyNeighborhoodGivesBias) {
  const auto s = GraphSkeleton::from_edges({"a", "y"}, {{"a", "y", 1.0}}, "y");
  EccLayer layer("e", 2, 3);
  Rng rng(1);
  layer.filter.weight.value = random_tensor(6, 1, rng);
  layer.bias.value << 1, -2, 3;
  std::vector<Tensor> h{random_tensor(2, 2, rng), random_tensor(2, 2, rng)};
  const auto out = ecc_conv(h, in_neighbors(s), layer, false);
  EXPECT_EQ(out[0].col(0), layer.bias.value.col(0));
  EXPECT_EQ(out[0].col(1), layer.bias.value.col(0));
  const auto act = ecc_conv(h, in_neighbors(s), layer, true);
  EXPECT_EQ(act[0](1, 0), 0.0);
}

TEST(EccConv, IdentityFilterAveragesParents) {
  const auto s = GraphSkeleton::from_edges({"a", "b", "y"}, {{"a", "y", 1.0}, {"b", "y", 1.0}}, "y");
  EccLayer layer("e", 2, 2);
  layer.filter.weight.value.setZero();
  layer.filter.bias.value << 1, 0, 0, 1;
  layer.bias.value.setZero();
  std::vector<Tensor> h(3, Tensor(2, 1));
  h[0] << 1, 2;
  h[1] << 3, -6;
  h[2] << 100, 100;
  const auto out = ecc_conv(h, in_neighbors(s), layer, false);
  EXPECT_DOUBLE_EQ(out[2](0, 0), 2.0);
  EXPECT_DOUBLE_EQ(out[2](1, 0), -2.0);
}

TEST(EccConv, MatchesNaiveLoops) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(derive_seed(seed, 12));
    const std::size_t n = 3 + seed % 6;
    const auto s = random_skeleton_dag(n, 0.5, n - 1, rng);
    const auto nb = in_neighbors(s);
    const Eigen::Index din = 3, dout = 2, batch = 4;
    EccLayer layer("e", din, dout);
    layer.filter.weight.value = random_tensor(din * dout, 1, rng);
    layer.filter.bias.value = random_tensor(din * dout, 1, rng);
    layer.bias.value = random_tensor(dout, 1, rng);
    std::vector<Tensor> h;
    for (std::size_t i = 0; i < n; ++i) h.push_back(random_tensor(din, batch, rng));
    const auto got = ecc_conv(h, nb, layer, true);
    for (std::size_t i = 0; i < n; ++i) {
      for (Eigen::Index b = 0; b < batch; ++b) {
        for (Eigen::Index o = 0; o < dout; ++o) {
          double z = 0.0;
          for (auto u : nb[i]) {
            for (Eigen::Index k = 0; k < din; ++k) {
              const Eigen::Index flat = o + k * dout;
              const double theta = layer.filter.weight.value(flat, 0) * 1.0 + layer.filter.bias.value(flat, 0);
              z += theta * h[u](k, b);
            }
          }
          if (!nb[i].empty()) z /= static_cast<double>(nb[i].size());
          z += layer.bias.value(o, 0);
          EXPECT_NEAR(got[i](o, b), naive_relu(z), 1e-12) << "seed " << seed << " node " << i;
        }
      }
    }
  }
}

TEST(Model, ConfigErrors) {
  const auto s = GraphSkeleton::from_edges({"a", "y"}, {{"a", "y", 1.0}}, "y");
  ModelConfig c;
  c.hidden = 0;
  EXPECT_THROW(Model(s, c), ConfigError);
  c.hidden = 4;
  c.sage_sample = -1;
  EXPECT_THROW(Model(s, c), ConfigError);
  EXPECT_THROW(parse_model_kind("gat"), ConfigError);
  EXPECT_EQ(parse_model_kind("ecc"), ModelKind::kEcc);
  EXPECT_EQ(to_string(ModelKind::kSage), "sage");
  Model m(s, ModelConfig{});
  EXPECT_THROW(m.set_target_scaling(0.0, 0.0), NumericError);
  EXPECT_THROW(m.forward(Eigen::MatrixXd::Zero(3, 1)), SchemaError);
  EXPECT_EQ(m.conv_layers(), 3u);
  ModelConfig e;
  e.kind = ModelKind::kEcc;
  EXPECT_EQ(Model(s, e).conv_layers(), 2u);
}

TEST(Model, GradientsPassFiniteDifferences) {
  for (auto kind : {ModelKind::kSage, ModelKind::kEcc}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(derive_seed(seed, 21));
      const std::size_t n = 4 + seed % 3;
      auto s = random_skeleton_dag(n, 0.6, n - 1, rng);
      ModelConfig c;
      c.kind = kind;
      c.hidden = 4;
      c.seed = seed;
      Model m(s, c);
      for (auto* p : m.parameters()) {
        if (p->name.find(".b") != std::string::npos) p->value = 0.1 * random_tensor(p->value.rows(), p->value.cols(), rng);
      }
      Eigen::MatrixXd x = random_tensor(static_cast<Eigen::Index>(n), 6, rng);
      x.row(static_cast<Eigen::Index>(s.target)).setZero();
      const Eigen::VectorXd y = random_tensor(6, 1, rng).col(0);
      const auto report = diff::finite_diff_check(
          m.parameters(), [&] { return diff::mse(m.forward(x), y); }, [&] { m.loss_and_grad(x, y); });
      EXPECT_TRUE(report.pass) << to_string(kind) << " seed " << seed << " worst " << report.worst << " rel "
                               << report.max_rel_error;
      EXPECT_GT(report.checked, 0u);
    }
  }
}

TEST(Model, ZeroParametersPredictZero) {
  Rng rng(3);
  const auto s = random_skeleton_dag(5, 0.7, 4, rng);
  for (auto kind : {ModelKind::kSage, ModelKind::kEcc}) {
    ModelConfig c;
    c.kind = kind;
    Model m(s, c);
    for (auto* p : m.parameters()) p->value.setZero();
    const auto y = m.forward(random_tensor(5, 7, rng));
    EXPECT_EQ(y, Eigen::VectorXd::Zero(7));
    m.set_target_scaling(2.5, 3.0);
    EXPECT_EQ(m.predict(random_tensor(5, 2, rng)), Eigen::VectorXd::Constant(2, 2.5));
  }
}

TEST(Model, NodeAndEdgeOrderInvariance) {
  Rng rng(9);
  const auto s = random_skeleton_dag(6, 0.6, 5, rng);
  const Eigen::MatrixXd x = random_tensor(6, 5, rng);

  std::vector<std::size_t> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::string> labels;
  Eigen::MatrixXd px(6, 5);
  for (std::size_t k = 0; k < 6; ++k) {
    labels.push_back(s.labels[perm[k]]);
    px.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(perm[k]));
  }
  auto edges = s.edges;
  std::reverse(edges.begin(), edges.end());
  const auto permuted = GraphSkeleton::from_edges(labels, s.edges, s.labels[s.target]);
  const auto reordered = GraphSkeleton::from_edges(s.labels, edges, s.labels[s.target]);

  for (auto kind : {ModelKind::kSage, ModelKind::kEcc}) {
    ModelConfig c;
    c.kind = kind;
    c.seed = 4;
    const auto base = Model(s, c).forward(x);
    EXPECT_EQ(Model(reordered, c).forward(x), base);
    EXPECT_TRUE(Model(permuted, c).forward(px).isApprox(base, 1e-12));
  }
}

TEST(Model, HandUnrolledEccChain) {
  // a -> b -> y, hidden width 1.
  const auto s = GraphSkeleton::from_edges({"a", "b", "y"}, {{"a", "b", 1.0}, {"b", "y", 1.0}}, "y");
  ModelConfig c;
  c.kind = ModelKind::kEcc;
  c.hidden = 1;
  Model m(s, c);
  const auto params = m.parameters();
  ASSERT_EQ(params.size(), 8u);
  // ecc0: F.w, F.b, b; ecc1: F.w, F.b, b; ff0: w, b.
  const double v[] = {0.5, 1.0, -0.2, 2.0, -0.5, 0.3, 1.5, 0.1};
  for (std::size_t k = 0; k < 8; ++k) params[k]->value.setConstant(v[k]);
  Eigen::MatrixXd x(3, 2);
  x << 0.4, -2.0, 0.8, 1.0, 0.0, 0.0;
  const auto y = m.forward(x);
  for (int col = 0; col < 2; ++col) {
    const double hb = naive_relu((0.5 + 1.0) * x(0, col) - 0.2);
    const double hy = (2.0 - 0.5) * hb + 0.3;
    EXPECT_DOUBLE_EQ(y(col), 1.5 * hy + 0.1);
  }
}

TEST(Model, TargetValueNeverReachesPrediction) {
  auto t = small_table({"a", "b", "y"}, "y", 10, 2);
  const auto s = GraphSkeleton::from_edges({"a", "b", "y"}, {{"a", "y", 1.0}, {"y", "b", 1.0}}, "y");
  Model m(s, ModelConfig{});
  const auto p1 = m.predict(build_instances(t, s));
  t.values.col(2).setConstant(1e6);
  const auto p2 = m.predict(build_instances(t, s));
  EXPECT_EQ(p1, p2);
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  const auto t = small_table({"a", "b", "y"}, "y", 12, 4);
  const auto s = GraphSkeleton::from_edges({"a", "b", "y"}, {{"a", "y", 1.0}, {"b", "y", 1.0}}, "y");
  Model m(s, ModelConfig{});
  std::vector<Tensor> before;
  for (auto* p : m.parameters()) before.push_back(p->value);
  TrainConfig tc;
  tc.lr = 0.0;
  tc.epochs = 5;
  const auto r = train(m, build_instances(t, s), tc);
  ASSERT_EQ(r.loss_history.size(), 5u);
  const auto params = m.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) EXPECT_EQ(params[k]->value, before[k]);
  for (double l : r.loss_history) EXPECT_DOUBLE_EQ(l, r.loss_history.front());
}

TEST(Train, ErrorsAndScaling) {
  const auto t = small_table({"a", "y"}, "y", 5, 4);
  const auto s = GraphSkeleton::from_edges({"a", "y"}, {{"a", "y", 1.0}}, "y");
  Model m(s, ModelConfig{});
  TrainConfig tc;
  EXPECT_THROW(train(m, {}, tc), ConfigError);
  tc.epochs = -1;
  EXPECT_THROW(train(m, build_instances(t, s), tc), ConfigError);
  tc.epochs = 0;
  tc.batch_size = -2;
  EXPECT_THROW(train(m, build_instances(t, s), tc), ConfigError);
  tc.batch_size = 0;
  const auto inst = build_instances(t, s);
  train(m, inst, tc);
  const auto y = stack_labels(inst);
  EXPECT_NEAR(m.offset(), y.mean(), 1e-15);
  EXPECT_NEAR(m.scale(), std::sqrt((y.array() - y.mean()).square().mean()), 1e-15);
}

TEST(Train, MemorizesSmallDataset) {
  // ECC has no self term, so raw features reach the target only from two hops
  // up; a chain a -> b -> y feeds it the scalar a. Labels are a piecewise
  // linear function of a with its kink at zero.
  const auto s = GraphSkeleton::from_edges({"a", "b", "y"}, {{"a", "b", 1.0}, {"b", "y", 1.0}}, "y");
  const double a[] = {-0.9, -0.5, -0.1, 0.2, 0.55, 0.85};
  const double b[] = {0.3, -0.7, 0.1, 0.9, -0.2, 0.5};
  std::vector<GraphInstance> inst(6);
  for (std::size_t k = 0; k < inst.size(); ++k) {
    inst[k].x = Eigen::Vector3d(a[k], b[k], 0.0);
    inst[k].label = 0.7 * naive_relu(a[k]) - 0.4 * naive_relu(-a[k]) + 0.1;
  }
  for (auto kind : {ModelKind::kSage, ModelKind::kEcc}) {
    ModelConfig c;
    c.kind = kind;
    c.hidden = 16;
    Model m(s, c);
    TrainConfig tc;
    tc.lr = 0.01;
    tc.epochs = 2000;
    const auto r = train(m, inst, tc);
    EXPECT_LT(diff::mse(m.predict(inst), stack_labels(inst)), 1e-4) << to_string(kind);
    EXPECT_LT(r.loss_history.back(), r.loss_history.front());
  }
}

TEST(Train, MiniBatchIsDeterministic) {
  const auto t = small_table({"a", "b", "y"}, "y", 20, 8);
  const auto s = GraphSkeleton::from_edges({"a", "b", "y"}, {{"a", "y", 1.0}}, "y");
  TrainConfig tc;
  tc.epochs = 20;
  tc.batch_size = 6;
  tc.seed = 3;
  Model a(s, ModelConfig{}), b(s, ModelConfig{});
  const auto ra = train(a, build_instances(t, s), tc);
  const auto rb = train(b, build_instances(t, s), tc);
  EXPECT_EQ(ra.loss_history, rb.loss_history);
  EXPECT_EQ(a.forward(Eigen::MatrixXd::Ones(3, 1)), b.forward(Eigen::MatrixXd::Ones(3, 1)));
}

TEST(Train, BenchmarkLossHalves) {
  scm::BenchmarkOptions opt;
  opt.n_days = 40;
  opt.seed = 2;
  const auto bm = scm::default_farm_benchmark(opt);
  std::vector<scm::EnvironmentSpec> envs = bm.train;
  envs.insert(envs.end(), bm.test.begin(), bm.test.end());
  const auto raw = scm::sample_all(bm.scm, envs, scm::field_universe(envs));
  const auto mt = bench::prepare_model_table(raw, bm.scm.dag.labels());
  const auto train_table = mt.table.select_rows(mt.split.train);
  const auto s = GraphSkeleton::from_dag(bm.scm.dag, mt.table.schema.names(), mt.table.schema.target());
  for (auto kind : {ModelKind::kSage, ModelKind::kEcc}) {
    ModelConfig c;
    c.kind = kind;
    Model m(s, c);
    TrainConfig tc;
    tc.epochs = 300;
    const auto r = train(m, build_instances(train_table, s), tc);
    EXPECT_LE(r.loss_history.back(), 0.5 * r.loss_history.front()) << to_string(kind);
  }
}

TEST(Checkpoint, SaveLoadRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "causalsoil_test_model.bin";
  const auto s = GraphSkeleton::from_edges({"a", "b", "y"}, {{"a", "y", 1.0}, {"b", "a", 1.0}}, "y");
  Rng rng(1);
  const Eigen::MatrixXd x = random_tensor(3, 4, rng);
  for (auto kind : {ModelKind::kSage, ModelKind::kEcc}) {
    ModelConfig c;
    c.kind = kind;
    c.hidden = 5;
    c.seed = 17;
    Model m(s, c);
    m.set_target_scaling(1.25, 0.5);
    m.save(path.string());
    const auto back = Model::load(path.string(), s);
    EXPECT_EQ(back.config().kind, kind);
    EXPECT_EQ(back.config().hidden, 5);
    EXPECT_EQ(back.predict(x), m.predict(x));
  }
  diff::write_checkpoint(path.string(), {{"w", Tensor::Zero(1, 1)}});
  EXPECT_THROW(Model::load(path.string(), s), SchemaError);
  std::filesystem::remove(path);
}

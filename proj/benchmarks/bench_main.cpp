#include <map>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "causalsoil/baselines.hpp"
#include "causalsoil/bench.hpp"
#include "causalsoil/discovery.hpp"
#include "causalsoil/gnn.hpp"
#include "causalsoil/scm.hpp"
#include "causalsoil/stat_tests.hpp"

using namespace causalsoil;

namespace {

struct Fixture {
  scm::Benchmark bm;
  Table train;
  bench::ModelTable model;
};

const Fixture& fixture(int n_days) {
  static std::map<int, Fixture> cache;
  auto it = cache.find(n_days);
  if (it != cache.end()) return it->second;
  Fixture f;
  scm::BenchmarkOptions opt;
  opt.n_days = n_days;
  opt.seed = 1;
  f.bm = scm::default_farm_benchmark(opt);
  f.train = scm::sample_all(f.bm.scm, f.bm.train, scm::field_universe(f.bm.train));
  auto envs = f.bm.train;
  envs.insert(envs.end(), f.bm.test.begin(), f.bm.test.end());
  const Table raw = scm::sample_all(f.bm.scm, envs, scm::field_universe(envs));
  f.model = bench::prepare_model_table(raw, f.bm.scm.dag.labels());
  return cache.emplace(n_days, std::move(f)).first->second;
}

void BM_SufficientStatistics(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  const Eigen::MatrixXd x = f.train.select_columns(f.bm.scm.dag.labels()).values;
  for (auto _ : state) benchmark::DoNotOptimize(stats::suff_stat(x));
  state.SetItemsProcessed(state.iterations() * x.rows());
}
BENCHMARK(BM_SufficientStatistics)->Arg(80)->Arg(1000);

void BM_PcSample(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  const discovery::DiscoveryConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(discovery::pc(f.train, f.bm.scm.dag.labels(), cfg));
}
BENCHMARK(BM_PcSample)->Arg(80)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_PcOracle(benchmark::State& state) {
  const auto& f = fixture(80);
  const stats::CovarianceOracleTest test(scm::analytic_covariance(f.bm.scm));
  const discovery::DiscoveryConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(discovery::pc(test, f.bm.scm.dag.labels(), cfg));
}
BENCHMARK(BM_PcOracle)->Unit(benchmark::kMicrosecond);

void BM_Ges(benchmark::State& state) {
  const auto& f = fixture(80);
  const stats::GaussianBicScorer scorer(f.train, f.bm.scm.dag.labels(), state.range(0) != 0);
  const discovery::DiscoveryConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(state.range(0) ? discovery::gies(scorer, cfg) : discovery::ges(scorer, cfg));
  }
}
BENCHMARK(BM_Ges)->ArgName("interventional")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BicGraph(benchmark::State& state) {
  const auto& f = fixture(80);
  const stats::GaussianBicScorer scorer(f.train, f.bm.scm.dag.labels());
  for (auto _ : state) benchmark::DoNotOptimize(scorer.graph(f.bm.scm.dag));
}
BENCHMARK(BM_BicGraph)->Unit(benchmark::kMicrosecond);

void BM_GnnForwardBackward(benchmark::State& state) {
  const auto& f = fixture(80);
  const auto& t = f.model.table;
  const auto skel = gnn::GraphSkeleton::from_dag(f.bm.scm.dag, t.schema.names(), t.schema.target());
  const auto inst = gnn::build_instances(t, skel);
  const Eigen::MatrixXd x = gnn::stack_features(inst);
  const Eigen::VectorXd y = gnn::stack_labels(inst);
  gnn::ModelConfig mc;
  mc.kind = state.range(0) ? gnn::ModelKind::kEcc : gnn::ModelKind::kSage;
  gnn::Model m(skel, mc);
  const Eigen::VectorXd ys = (y.array() - y.mean()) / 10.0;
  for (auto _ : state) benchmark::DoNotOptimize(m.loss_and_grad(x, ys));
  state.SetItemsProcessed(state.iterations() * x.cols());
}
BENCHMARK(BM_GnnForwardBackward)->ArgName("ecc")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_FitTree(benchmark::State& state) {
  const auto& f = fixture(80);
  const auto data = baselines::make_dataset(f.model.table.select_rows(f.model.split.train));
  std::vector<std::size_t> rows(static_cast<std::size_t>(data.x.rows()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  baselines::TreeParams p;
  p.max_depth = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(baselines::fit_tree(data.x, data.y, rows, p));
}
BENCHMARK(BM_FitTree)->ArgName("depth")->Arg(4)->Arg(-1)->Unit(benchmark::kMillisecond);

void BM_MlpEpoch(benchmark::State& state) {
  const auto& f = fixture(80);
  const auto data = baselines::make_dataset(f.model.table.select_rows(f.model.split.train));
  baselines::MlpConfig c;
  c.hidden = {64, 64};
  auto m = baselines::mlp_init(static_cast<std::size_t>(data.x.cols()), c);
  const Eigen::VectorXd ys = (data.y.array() - data.y.mean()) / 10.0;
  for (auto _ : state) benchmark::DoNotOptimize(m.loss_and_grad(data.x, ys));
}
BENCHMARK(BM_MlpEpoch)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

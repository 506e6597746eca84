#include "causalsoil/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include "causalsoil/baselines.hpp"
#include "causalsoil/error.hpp"
#include "causalsoil/gnn.hpp"
#include "causalsoil/graph.hpp"
#include "causalsoil/rng.hpp"

namespace causalsoil::bench {

Split split_by_treatment(const Table& table, const std::set<std::string>& train, const std::set<std::string>& test) {
  if (train.empty() || test.empty()) throw ConfigError("split_by_treatment", "train and test treatment sets must be non-empty");
  for (const auto& t : train) {
    if (test.count(t)) throw ConfigError("split_by_treatment", "treatment '" + t + "' is in both sets");
  }
  Split s;
  s.train_treatments = train;
  s.test_treatments = test;
  s.train.assign(table.rows(), false);
  s.test.assign(table.rows(), false);
  std::set<std::string> train_fields;
  std::set<std::string> test_fields;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto& t = table.treatments.at(r);
    if (train.count(t)) {
      s.train[r] = true;
      ++s.train_rows;
      train_fields.insert(table.field_ids.at(r));
    } else if (test.count(t)) {
      s.test[r] = true;
      ++s.test_rows;
      test_fields.insert(table.field_ids.at(r));
    }
  }
  if (s.train_rows == 0) throw SchemaError("split_by_treatment", "no rows carry a training treatment");
  if (s.test_rows == 0) throw SchemaError("split_by_treatment", "no rows carry a test treatment");
  s.train_fields = train_fields.size();
  s.test_fields = test_fields.size();
  return s;
}

Metrics evaluate(const Eigen::VectorXd& predictions, const Eigen::VectorXd& labels) {
  return {diff::mse(predictions, labels), diff::mae(predictions, labels)};
}

// ---------------------------------------------------------------- config

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + std::to_string(v[k]);
  return s;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void BenchConfig::validate() const {
  discovery.validate();
  if (seeds < 1) throw ConfigError("bench", "seeds must be >= 1");
  if (n_days < 2) throw ConfigError("bench", "n_days must be >= 2");
  if (!(noise_scale > 0)) throw ConfigError("bench", "noise_scale must be > 0");
  if (gnn_hidden < 1 || gnn_epochs < 0) throw ConfigError("bench", "invalid GNN size or epochs");
  if (sage_lr < 0 || ecc_lr < 0) throw ConfigError("bench", "learning rates must be >= 0");
  if (random_edges < 0 || rf_trees < 1 || gbt_estimators < 0 || gbt_depth < 1 || mlp_epochs < 0) {
    throw ConfigError("bench", "invalid baseline setting");
  }
  for (int w : lag_windows) {
    if (w <= 0) throw ConfigError("bench", "lag windows must be positive");
  }
  for (const auto& m : methods) {
    if (std::find(method_keys().begin(), method_keys().end(), m) == method_keys().end()) {
      throw ConfigError("bench", "unknown method '" + m + "'");
    }
  }
  if (jobs < 1) throw ConfigError("bench", "jobs must be >= 1");
}

KeyValues BenchConfig::to_kv() const {
  KeyValues kv;
  kv.set("bench.seed", std::to_string(seed));
  kv.set("bench.seeds", std::to_string(seeds));
  kv.set("bench.n_days", std::to_string(n_days));
  kv.set("bench.noise_scale", fmt(noise_scale));
  kv.set("bench.lag_windows", join_ints(lag_windows));
  std::string ms;
  for (std::size_t k = 0; k < methods.size(); ++k) ms += (k ? "," : "") + methods[k];
  kv.set("bench.methods", ms);
  kv.set("bench.oracle", oracle ? "true" : "false");
  kv.set("discovery.alpha", fmt(discovery.alpha));
  kv.set("discovery.max_cond_size", std::to_string(discovery.max_cond_size));
  kv.set("discovery.max_parents", std::to_string(discovery.max_parents));
  kv.set("discovery.use_interventions", discovery.use_interventions ? "true" : "false");
  kv.set("model.hidden", std::to_string(gnn_hidden));
  kv.set("model.epochs", std::to_string(gnn_epochs));
  kv.set("model.sage_lr", fmt(sage_lr));
  kv.set("model.ecc_lr", fmt(ecc_lr));
  kv.set("model.ecc_ancestors", ecc_ancestors ? "true" : "false");
  kv.set("baseline.random_edges", std::to_string(random_edges));
  kv.set("baseline.rf_trees", std::to_string(rf_trees));
  kv.set("baseline.gbt_estimators", std::to_string(gbt_estimators));
  kv.set("baseline.gbt_depth", std::to_string(gbt_depth));
  kv.set("baseline.gbt_lr", fmt(gbt_lr));
  kv.set("baseline.mlp_epochs", std::to_string(mlp_epochs));
  return kv;
}

BenchConfig BenchConfig::from_kv(const KeyValues& kv) { return from_kv(kv, BenchConfig{}); }

BenchConfig BenchConfig::from_kv(const KeyValues& kv, const BenchConfig& d) {
  BenchConfig c = d;
  c.seed = static_cast<std::uint64_t>(kv.get_int("bench.seed", static_cast<long long>(d.seed)));
  c.seeds = static_cast<int>(kv.get_int("bench.seeds", d.seeds));
  c.n_days = static_cast<int>(kv.get_int("bench.n_days", d.n_days));
  c.noise_scale = kv.get_double("bench.noise_scale", d.noise_scale);
  if (auto v = kv.get("bench.lag_windows")) {
    c.lag_windows.clear();
    for (const auto& s : split_list(*v)) {
      try {
        c.lag_windows.push_back(std::stoi(s));
      } catch (const std::exception&) {
        throw ConfigError("bench", "bad lag window '" + s + "'");
      }
    }
  }
  if (auto v = kv.get("bench.methods")) c.methods = split_list(*v);
  c.oracle = kv.get_bool("bench.oracle", d.oracle);
  c.discovery.alpha = kv.get_double("discovery.alpha", d.discovery.alpha);
  c.discovery.max_cond_size = static_cast<int>(kv.get_int("discovery.max_cond_size", d.discovery.max_cond_size));
  c.discovery.max_parents = static_cast<int>(kv.get_int("discovery.max_parents", d.discovery.max_parents));
  c.discovery.use_interventions = kv.get_bool("discovery.use_interventions", d.discovery.use_interventions);
  c.gnn_hidden = static_cast<int>(kv.get_int("model.hidden", d.gnn_hidden));
  c.gnn_epochs = static_cast<int>(kv.get_int("model.epochs", d.gnn_epochs));
  c.sage_lr = kv.get_double("model.sage_lr", d.sage_lr);
  c.ecc_lr = kv.get_double("model.ecc_lr", d.ecc_lr);
  c.ecc_ancestors = kv.get_bool("model.ecc_ancestors", d.ecc_ancestors);
  c.random_edges = static_cast<int>(kv.get_int("baseline.random_edges", d.random_edges));
  c.rf_trees = static_cast<int>(kv.get_int("baseline.rf_trees", d.rf_trees));
  c.gbt_estimators = static_cast<int>(kv.get_int("baseline.gbt_estimators", d.gbt_estimators));
  c.gbt_depth = static_cast<int>(kv.get_int("baseline.gbt_depth", d.gbt_depth));
  c.gbt_lr = kv.get_double("baseline.gbt_lr", d.gbt_lr);
  c.mlp_epochs = static_cast<int>(kv.get_int("baseline.mlp_epochs", d.mlp_epochs));
  c.validate();
  return c;
}

std::string BenchConfig::hash() const { return hex(fnv1a(to_kv().to_text())); }

const std::vector<std::string>& method_keys() {
  static const std::vector<std::string> keys{"pc-sage", "pc-ecc",      "ges-sage", "ges-ecc", "gies-sage",
                                             "gies-ecc", "random-sage", "gbt",      "mlp",     "rf"};
  return keys;
}

std::string method_name(const std::string& key) {
  static const std::map<std::string, std::string> names{
      {"pc-sage", "PC + GraphSAGE"},
      {"pc-ecc", "PC + ECC MPNN"},
      {"ges-sage", "GES + GraphSAGE"},
      {"ges-ecc", "GES + ECC MPNN"},
      {"gies-sage", "GIES + GraphSAGE"},
      {"gies-ecc", "GIES + ECC MPNN"},
      {"random-sage", "Random Edges + GraphSAGE"},
      {"gbt", "XGBoost-style GBT"},
      {"mlp", "MLP"},
      {"rf", "Random Forest"},
      {"oracle-sage", "True DAG + GraphSAGE"},
      {"oracle-ecc", "True DAG + ECC MPNN"},
  };
  const auto it = names.find(key);
  if (it == names.end()) throw ConfigError("bench", "unknown method '" + key + "'");
  return it->second;
}

bool method_is_causal(const std::string& key) {
  return key.rfind("pc-", 0) == 0 || key.rfind("ges-", 0) == 0 || key.rfind("gies-", 0) == 0 ||
         key.rfind("oracle-", 0) == 0;
}

// ---------------------------------------------------------------- pipeline

ModelTable prepare_model_table(const Table& raw, const std::vector<std::string>& discovery_columns,
                               const std::vector<int>& lag_windows, const std::set<std::string>& train,
                               const std::set<std::string>& test) {
  Table t = raw;
  std::vector<std::string> categorical;
  for (const auto& c : t.schema.columns()) {
    if (c.kind == ColumnKind::kCategorical) categorical.push_back(c.name);
  }
  if (!categorical.empty()) t = ingest::one_hot_encode(t, categorical);
  if (!lag_windows.empty()) t = ingest::lag_counts(t, lag_windows);
  ModelTable mt;
  mt.split = split_by_treatment(t, train, test);
  std::vector<std::string> scaled;
  for (const auto& c : t.schema.columns()) {
    if (c.name != t.schema.target()) scaled.push_back(c.name);
  }
  mt.scaler = ingest::min_max_fit(t, scaled, mt.split.train);
  mt.table = ingest::min_max_apply(t, mt.scaler);
  for (const auto& c : discovery_columns) mt.table.schema.index_of(c, "prepare_model_table");
  mt.discovery_columns = discovery_columns;
  return mt;
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t k = 0; k < size; ++k) {
    h ^= p[k];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a(const std::string& text) { return fnv1a(text.data(), text.size()); }

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t row_set_hash(const Table& table, const RowMask& mask) {
  std::vector<std::string> keys;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    if (mask.empty() || mask[r]) keys.push_back(table.field_ids[r] + "@" + std::to_string(table.dates[r].days));
  }
  std::sort(keys.begin(), keys.end());
  std::uint64_t h = fnv1a(std::string("rows"));
  for (const auto& k : keys) {
    h = fnv1a(k.data(), k.size(), h);
    h = fnv1a("\n", 1, h);
  }
  return h;
}

namespace {

std::uint64_t hash_params(const std::vector<diff::Parameter*>& params) {
  std::uint64_t h = fnv1a(std::string("params"));
  for (const auto* p : params) {
    h = fnv1a(p->name.data(), p->name.size(), h);
    h = fnv1a(p->value.data(), sizeof(double) * static_cast<std::size_t>(p->value.size()), h);
  }
  return h;
}

std::uint64_t hash_trees(const std::vector<baselines::Tree>& trees, double base) {
  std::uint64_t h = fnv1a(&base, sizeof base);
  for (const auto& t : trees) {
    for (const auto& n : t.nodes) {
      h = fnv1a(&n.feature, sizeof n.feature, h);
      h = fnv1a(&n.threshold, sizeof n.threshold, h);
      h = fnv1a(&n.value, sizeof n.value, h);
    }
  }
  return h;
}

void run_pool(std::vector<std::function<void()>>& tasks, int jobs) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, jobs)), tasks.size());
  if (workers <= 1) {
    for (auto& t : tasks) t();
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t k = w; k < tasks.size(); k += workers) tasks[k]();
    });
  }
  for (auto& th : pool) th.join();
}

bool selected(const BenchConfig& c, const std::string& key) {
  return c.methods.empty() || std::find(c.methods.begin(), c.methods.end(), key) != c.methods.end();
}

}  // namespace

SeedOutput run_seed(const scm::SCMSpec& scm, const Table& raw, const BenchConfig& config, int seed_index,
                    std::uint64_t seed) {
  config.validate();
  SeedOutput out;
  const auto disc_cols = scm.dag.labels();
  const ModelTable mt = prepare_model_table(raw, disc_cols, config.lag_windows);
  const Table train = mt.table.select_rows(mt.split.train);
  const Table test = mt.table.select_rows(mt.split.test);
  out.audit["train"] = row_set_hash(mt.table, mt.split.train);
  out.audit["test"] = row_set_hash(mt.table, mt.split.test);
  out.audit["scaler"] = row_set_hash(mt.table, mt.split.train);
  out.fingerprints["scaler"] = fnv1a(mt.scaler.to_text());

  const auto columns = mt.table.schema.names();
  const std::string target = mt.table.schema.target();
  const auto plain = gnn::GraphSkeleton::from_edges(columns, {}, target);
  const auto train_inst = gnn::build_instances(train, plain);
  const auto test_inst = gnn::build_instances(test, plain);
  const Eigen::MatrixXd test_x = gnn::stack_features(test_inst);
  const Eigen::VectorXd test_y = gnn::stack_labels(test_inst);

  const std::string suffix = "_seed" + std::to_string(seed_index + 1) + ".dot";
  const auto roles = scm::role_names(scm);

  // Discovery on training rows only.
  struct Found {
    gnn::GraphSkeleton skeleton;
    std::size_t warnings = 0;
    std::string error;
  };
  std::map<std::string, Found> found;
  for (const std::string algo : {"pc", "ges", "gies"}) {
    if (!selected(config, algo + "-sage") && !selected(config, algo + "-ecc")) continue;
    Found f;
    try {
      auto d = discovery::discover(discovery::parse_algorithm(algo), train, disc_cols, config.discovery);
      f.skeleton = gnn::GraphSkeleton::from_dag(d.extension.dag, columns, target);
      f.warnings = d.warnings;
      out.fingerprints["graph." + algo] = fnv1a(graph::cpdag_to_text(d.cpdag));
      out.dots[algo + suffix] = graph::to_dot(d.cpdag, roles, algo);
      out.audit["discovery." + algo] = row_set_hash(train, {});
    } catch (const std::exception& e) {
      f.error = e.what();
    }
    found.emplace(algo, std::move(f));
  }
  if (config.oracle) {
    found.emplace("oracle", Found{gnn::GraphSkeleton::from_dag(scm.dag, columns, target), 0, {}});
  }

  struct Cell {
    std::string key;
    ResultRow row;
    std::uint64_t fingerprint = 0;
    bool oracle = false;
  };
  std::vector<Cell> cells;
  auto add_cell = [&](const std::string& key, const std::string& skeleton, bool oracle) {
    Cell c;
    c.key = key;
    c.oracle = oracle;
    c.row.method = method_name(key);
    c.row.causal = method_is_causal(key);
    c.row.skeleton = skeleton;
    c.row.seed = seed;
    c.row.seed_index = seed_index;
    cells.push_back(std::move(c));
  };
  for (const auto& key : method_keys()) {
    if (!selected(config, key)) continue;
    const auto dash = key.find('-');
    std::string skel = "none";
    if (key == "random-sage") {
      skel = "random";
    } else if (dash != std::string::npos) {
      skel = key.substr(0, dash);
    }
    add_cell(key, skel, false);
  }
  if (config.oracle) {
    add_cell("oracle-sage", "oracle", true);
    add_cell("oracle-ecc", "oracle", true);
  }

  const baselines::Dataset d_train = baselines::make_dataset(train);
  const baselines::Dataset d_test = baselines::make_dataset(test, d_train.features);

  std::vector<std::function<void()>> tasks;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    tasks.emplace_back([&, k] {
      Cell& c = cells[k];
      const auto cell_seed = derive_seed(seed, fnv1a(c.key));
      try {
        Eigen::VectorXd pred;
        const auto dash = c.key.find('-');
        const std::string model = dash == std::string::npos ? c.key : c.key.substr(dash + 1);
        if (model == "sage" || model == "ecc") {
          gnn::GraphSkeleton skel;
          if (c.row.skeleton == "random") {
            skel = baselines::random_skeleton(columns, static_cast<std::size_t>(config.random_edges), target,
                                              derive_seed(cell_seed, 1));
          } else {
            const auto& f = found.at(c.row.skeleton);
            if (!f.error.empty()) throw Error(ExitCode::kNumeric, "discovery", f.error);
            skel = f.skeleton;
            c.row.warnings = f.warnings;
          }
          gnn::ModelConfig mc;
          mc.kind = gnn::parse_model_kind(model);
          mc.hidden = config.gnn_hidden;
          mc.ancestor_neighborhood = config.ecc_ancestors;
          mc.seed = cell_seed;
          gnn::Model m(std::move(skel), mc);
          gnn::TrainConfig tc;
          tc.epochs = config.gnn_epochs;
          tc.lr = mc.kind == gnn::ModelKind::kSage ? config.sage_lr : config.ecc_lr;
          tc.seed = cell_seed;
          gnn::train(m, train_inst, tc);
          pred = m.predict(test_x);
          c.fingerprint = hash_params(m.parameters());
        } else if (c.key == "gbt") {
          baselines::GbtConfig gc;
          gc.n_estimators = config.gbt_estimators;
          gc.max_depth = config.gbt_depth;
          gc.lr = config.gbt_lr;
          gc.seed = cell_seed;
          const auto m = baselines::gbt_train(d_train, gc);
          pred = m.predict(d_test.x);
          c.fingerprint = hash_trees(m.trees, m.base);
        } else if (c.key == "rf") {
          baselines::RfConfig rc;
          rc.n_trees = config.rf_trees;
          rc.seed = cell_seed;
          const auto m = baselines::rf_train(d_train, rc);
          pred = m.predict(d_test.x);
          c.fingerprint = hash_trees(m.trees, 0.0);
        } else if (c.key == "mlp") {
          auto g = baselines::mlp_grid_search(d_train, baselines::default_mlp_grid(config.mlp_epochs, cell_seed), 0.2,
                                              cell_seed);
          pred = g.model.predict(d_test.x);
          c.fingerprint = hash_params(g.model.parameters());
        }
        if (!pred.allFinite()) throw NumericError(c.row.method, "non-finite test predictions");
        const auto m = evaluate(pred, test_y);
        c.row.mse = m.mse;
        c.row.mae = m.mae;
      } catch (const std::exception& e) {
        c.row.failed = true;
        c.row.error = e.what();
        c.row.mse = std::numeric_limits<double>::quiet_NaN();
        c.row.mae = std::numeric_limits<double>::quiet_NaN();
      }
    });
  }
  run_pool(tasks, config.jobs);

  for (auto& c : cells) {
    if (!c.row.failed) {
      out.fingerprints["params." + c.key] = c.fingerprint;
      out.audit["fit." + c.key] = row_set_hash(train, {});
    }
    (c.oracle ? out.oracle_rows : out.rows).push_back(std::move(c.row));
  }
  return out;
}

// ---------------------------------------------------------------- summaries

std::string Histogram::to_csv() const {
  std::string s = "group,bin_lo,bin_hi,count\n";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t b = 0; b < counts[g].size(); ++b) {
      s += groups[g] + "," + fmt(edges[b]) + "," + fmt(edges[b + 1]) + "," + std::to_string(counts[g][b]) + "\n";
    }
  }
  return s;
}

Histogram distribution_summary(const Table& table, const std::string& column, int bins) {
  if (bins < 1) throw ConfigError("distribution_summary", "bins must be >= 1");
  const Eigen::VectorXd v = table.column(column);
  if (v.size() == 0) throw SchemaError("distribution_summary", "empty table");
  Histogram h;
  h.column = column;
  const double lo = v.minCoeff();
  const double hi = v.maxCoeff();
  const int nb = hi > lo ? bins : 1;
  for (int b = 0; b <= nb; ++b) h.edges.push_back(nb == 1 && hi == lo ? lo : lo + (hi - lo) * b / nb);
  std::set<std::string> groups(table.treatments.begin(), table.treatments.end());
  h.groups.assign(groups.begin(), groups.end());
  h.counts.assign(h.groups.size(), std::vector<std::size_t>(static_cast<std::size_t>(nb), 0));
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto g = static_cast<std::size_t>(
        std::lower_bound(h.groups.begin(), h.groups.end(), table.treatments[r]) - h.groups.begin());
    int b = hi > lo ? static_cast<int>((v(static_cast<Eigen::Index>(r)) - lo) / (hi - lo) * nb) : 0;
    b = std::clamp(b, 0, nb - 1);
    ++h.counts[g][static_cast<std::size_t>(b)];
  }
  return h;
}

MatrixOutput run_matrix(const BenchConfig& config) {
  config.validate();
  MatrixOutput out;
  for (int s = 0; s < config.seeds; ++s) {
    const auto seed = derive_seed(config.seed, static_cast<std::uint64_t>(s));
    scm::BenchmarkOptions opt;
    opt.n_days = config.n_days;
    opt.seed = seed;
    opt.noise_scale = config.noise_scale;
    const auto bm = scm::default_farm_benchmark(opt);
    auto envs = bm.train;
    envs.insert(envs.end(), bm.test.begin(), bm.test.end());
    const Table raw = scm::sample_all(bm.scm, envs, scm::field_universe(envs));
    if (s == 0) {
      out.dots["truth.dot"] = graph::to_dot(scm::true_cpdag(bm.scm), scm::role_names(bm.scm), "truth");
      for (const auto& col : {bm.scm.target, std::string("Field_Operation_plough")}) {
        out.histograms.emplace(col, distribution_summary(raw, col));
      }
    }
    auto so = run_seed(bm.scm, raw, config, s, seed);
    out.rows.insert(out.rows.end(), so.rows.begin(), so.rows.end());
    out.oracle_rows.insert(out.oracle_rows.end(), so.oracle_rows.begin(), so.oracle_rows.end());
    out.dots.insert(so.dots.begin(), so.dots.end());
    out.audits.push_back(std::move(so.audit));
  }
  return out;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<MethodSummary> summarize(const std::vector<ResultRow>& rows) {
  std::vector<MethodSummary> out;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> vals;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const MethodSummary& m) { return m.method == r.method; });
    if (it == out.end()) {
      out.push_back({r.method, r.causal, 0, 0, 0, 0, 0});
      it = out.end() - 1;
    }
    it->warnings += r.warnings;
    if (r.failed) {
      ++it->failed;
      continue;
    }
    ++it->ok;
    vals[r.method].first.push_back(r.mse);
    vals[r.method].second.push_back(r.mae);
  }
  for (auto& m : out) {
    m.median_mse = median(vals[m.method].first);
    m.median_mae = median(vals[m.method].second);
  }
  return out;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string s = "method,causal,skeleton,seed_index,seed,mse,mae,warnings,status\n";
  for (const auto& r : rows) {
    s += r.method + "," + (r.causal ? "1" : "0") + "," + r.skeleton + "," + std::to_string(r.seed_index + 1) + "," +
         std::to_string(r.seed) + "," + (r.failed ? "" : fmt(r.mse)) + "," + (r.failed ? "" : fmt(r.mae)) + "," +
         std::to_string(r.warnings) + "," + (r.failed ? "failed" : "ok") + "\n";
  }
  return s;
}

std::string render_report(const MatrixOutput& out, const BenchConfig& config) {
  std::ostringstream md;
  md << "# Soil carbon OOD benchmark\n\n";
  md << "Train treatments: red, blue. Test treatment: green (never ploughed).\n";
  md << "Metrics are in raw target units (total_C); medians over " << config.seeds << " seeds.\n\n";
  md << "Config hash: `" << config.hash() << "`\n\n";
  md << "Seeds:";
  for (int s = 0; s < config.seeds; ++s) md << " " << derive_seed(config.seed, static_cast<std::uint64_t>(s));
  md << "\n\n## Median test error\n\n| Method | Causal | MSE | MAE | ok | failed | warnings |\n|---|---|---|---|---|---|---|\n";
  auto table = [&](const std::vector<ResultRow>& rows) {
    for (const auto& m : summarize(rows)) {
      md << "| " << m.method << " | " << (m.causal ? "yes" : "no") << " | " << fmt(m.median_mse) << " | "
         << fmt(m.median_mae) << " | " << m.ok << " | " << m.failed << " | " << m.warnings << " |\n";
    }
  };
  table(out.rows);
  if (!out.oracle_rows.empty()) {
    md << "\n## True-graph skeleton\n\n| Method | Causal | MSE | MAE | ok | failed | warnings |\n"
          "|---|---|---|---|---|---|---|\n";
    table(out.oracle_rows);
  }
  md << "\n## Per-seed results\n\n| Method | Seed | MSE | MAE | Status |\n|---|---|---|---|---|\n";
  for (const auto* rows : {&out.rows, &out.oracle_rows}) {
    for (const auto& r : *rows) {
      md << "| " << r.method << " | " << r.seed_index + 1 << " | " << (r.failed ? "-" : fmt(r.mse)) << " | "
         << (r.failed ? "-" : fmt(r.mae)) << " | " << (r.failed ? "failed: " + r.error : "ok") << " |\n";
    }
  }
  bool clean = true;
  for (const auto& a : out.audits) {
    for (const auto& [stage, h] : a) {
      if (stage != "test" && h == a.at("test")) clean = false;
      if (stage != "test" && stage != "train" && h != a.at("train")) clean = false;
    }
  }
  md << "\n## Leakage audit\n\nEvery fitting stage consumed exactly the training rows: " << (clean ? "yes" : "NO") << "\n";
  md << "\n## Effective configuration\n\n```\n" << config.to_kv().to_text() << "```\n";
  return md.str();
}

void write_outputs(const std::string& dir, const MatrixOutput& out, const BenchConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "histograms");
  fs::create_directories(fs::path(dir) / "graphs");
  write_file((fs::path(dir) / "results.csv").string(), results_csv(out.rows));
  write_file((fs::path(dir) / "oracle.csv").string(), results_csv(out.oracle_rows));
  write_file((fs::path(dir) / "report.md").string(), render_report(out, config));
  for (const auto& [col, h] : out.histograms) {
    write_file((fs::path(dir) / "histograms" / (col + ".csv")).string(), h.to_csv());
  }
  for (const auto& [name, dot] : out.dots) write_file((fs::path(dir) / "graphs" / name).string(), dot);
}

}  // namespace causalsoil::bench

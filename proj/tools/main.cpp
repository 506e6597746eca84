// causalsoil command-line tool.
//
// Every subcommand reads an optional flat config file (section.key = value);
// flags override file values. The effective configuration and a version stamp
// are written to the output directory; the wall-clock timestamp goes to
// run_info.txt only, so all other outputs are reproducible byte for byte.

#include <algorithm>
#include <array>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "causalsoil/baselines.hpp"
#include "causalsoil/bench.hpp"
#include "causalsoil/discovery.hpp"
#include "causalsoil/error.hpp"
#include "causalsoil/gnn.hpp"
#include "causalsoil/graph.hpp"
#include "causalsoil/ingest.hpp"
#include "causalsoil/kvconfig.hpp"
#include "causalsoil/rng.hpp"
#include "causalsoil/scm.hpp"
#include "causalsoil/table_io.hpp"

namespace fs = std::filesystem;
using namespace causalsoil;

namespace {

// Flags bound to config keys; only flags given on the command line override.
struct Bindings {
  std::map<std::string, std::string> values;
  std::vector<std::pair<CLI::Option*, std::string>> options;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    options.emplace_back(app->add_option(flag, values[key], help), key);
  }
};

struct Command {
  CLI::App* app = nullptr;
  Bindings flags;
};

std::string config_path;

KeyValues effective(const Command& cmd) {
  KeyValues kv = config_path.empty() ? KeyValues{} : KeyValues::load(config_path);
  for (const auto& [opt, key] : cmd.flags.options) {
    if (opt->count() > 0) kv.set(key, cmd.flags.values.at(key));
  }
  return kv;
}

std::string require(const KeyValues& kv, const std::string& key, const std::string& flag) {
  auto v = kv.get(key);
  if (!v || v->empty()) throw ConfigError("cli", "missing required " + flag + " (config key " + key + ")");
  return *v;
}

std::set<std::string> split_set(const std::string& text) {
  std::set<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.insert(item);
  }
  return out;
}

std::vector<int> split_ints(const std::string& text) {
  std::vector<int> out;
  for (const auto& s : split_set(text)) out.push_back(std::stoi(s));
  std::sort(out.begin(), out.end());
  return out;
}

void stamp(const std::string& dir, const KeyValues& kv, const std::string& command) {
  fs::create_directories(dir);
  write_file((fs::path(dir) / "effective_config.txt").string(), kv.to_text());
  write_file((fs::path(dir) / "VERSION").string(), std::string("causalsoil ") + CAUSALSOIL_VERSION + "\n");
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  write_file((fs::path(dir) / "run_info.txt").string(), "command = " + command + "\ntimestamp = " + buf + "\n");
}

RowMask rows_with_treatment(const Table& t, const std::set<std::string>& treatments) {
  RowMask mask(t.rows(), false);
  for (std::size_t r = 0; r < t.rows(); ++r) mask[r] = treatments.count("all") || treatments.count(t.treatments[r]);
  return mask;
}

// Columns a model consumes: everything numeric.
Table numeric_only(const Table& t) {
  std::vector<std::string> keep;
  for (const auto& c : t.schema.columns()) {
    if (c.kind != ColumnKind::kCategorical) keep.push_back(c.name);
  }
  return t.select_columns(keep);
}

// Default discovery variables: raw observables and events, no one-hot or lag columns.
std::vector<std::string> default_discovery_columns(const Table& t) {
  std::vector<std::string> out;
  for (const auto& c : t.schema.columns()) {
    if (c.kind == ColumnKind::kCategorical || c.kind == ColumnKind::kOneHot || !c.source_group.empty()) continue;
    out.push_back(c.name);
  }
  return out;
}

gnn::GraphSkeleton load_skeleton(const std::string& path, const Table& table) {
  const auto edges = graph::edge_list_from_text(read_file(path));
  return gnn::GraphSkeleton::from_edges(table.schema.names(), edges, table.schema.target());
}

std::string metric_line(const bench::Metrics& m) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "mse = %.10g\nmae = %.10g\n", m.mse, m.mae);
  return buf;
}

int run_synth(const KeyValues& kv) {
  const auto out = kv.get_string("paths.out_dir", "synth_out");
  scm::BenchmarkOptions opt;
  opt.n_days = static_cast<int>(kv.get_int("synth.n_days", 365));
  opt.seed = static_cast<std::uint64_t>(kv.get_int("synth.seed", 0));
  opt.noise_scale = kv.get_double("synth.noise_scale", 1.0);
  const auto bm = scm::default_farm_benchmark(opt);
  auto envs = bm.train;
  envs.insert(envs.end(), bm.test.begin(), bm.test.end());
  const Table t = scm::sample_all(bm.scm, envs, scm::field_universe(envs));
  stamp(out, kv, "synth");
  io::write_table((fs::path(out) / "data.csv").string(), t);
  write_file((fs::path(out) / "truth.dot").string(), graph::to_dot(bm.scm.dag, scm::role_names(bm.scm), "truth"));
  write_file((fs::path(out) / "truth_edges.txt").string(), graph::edge_list_to_text(graph::to_edge_list(bm.scm.dag)));
  write_file((fs::path(out) / "truth_cpdag.txt").string(), graph::cpdag_to_text(scm::true_cpdag(bm.scm)));
  std::cout << "synth: " << t.rows() << " rows, " << envs.size() << " environments -> " << out << "\n";
  return 0;
}

int run_ingest(const KeyValues& kv) {
  const auto inputs = require(kv, "paths.input", "--input");
  const auto out = kv.get_string("paths.out_dir", "ingest_out");
  std::vector<Table> tables;
  std::stringstream ss(inputs);
  std::string path;
  while (std::getline(ss, path, ',')) {
    if (!path.empty()) tables.push_back(io::read_table(path));
  }
  Table t = tables.size() == 1 ? tables.front() : ingest::daily_merge(tables);
  std::vector<std::string> cat;
  for (const auto& c : t.schema.columns()) {
    if (c.kind == ColumnKind::kCategorical) cat.push_back(c.name);
  }
  if (!cat.empty()) t = ingest::one_hot_encode(t, cat);
  const auto windows = split_ints(kv.get_string("ingest.lag_windows", "45,182,365,730"));
  if (!windows.empty()) t = ingest::lag_counts(t, windows);
  const auto train = rows_with_treatment(t, split_set(kv.get_string("ingest.train", "red,blue")));
  std::vector<std::string> scaled;
  for (const auto& c : t.schema.columns()) {
    if (c.name != t.schema.target()) scaled.push_back(c.name);
  }
  const auto scaler = ingest::min_max_fit(t, scaled, train);
  t = ingest::min_max_apply(t, scaler);
  stamp(out, kv, "ingest");
  io::write_table((fs::path(out) / "model.csv").string(), t);
  write_file((fs::path(out) / "scaler.txt").string(), scaler.to_text());
  std::cout << "ingest: " << t.rows() << " rows x " << t.cols() << " columns, scaler fitted on " << scaler.fitted_on
            << " rows -> " << out << "\n";
  return 0;
}

int run_discover(const KeyValues& kv) {
  const auto input = require(kv, "paths.input", "--input");
  const auto out = kv.get_string("paths.out_dir", "discover_out");
  discovery::DiscoveryConfig cfg;
  cfg.alpha = kv.get_double("discovery.alpha", cfg.alpha);
  cfg.max_cond_size = static_cast<int>(kv.get_int("discovery.max_cond_size", cfg.max_cond_size));
  cfg.max_parents = static_cast<int>(kv.get_int("discovery.max_parents", cfg.max_parents));
  cfg.use_interventions = kv.get_bool("discovery.use_interventions", cfg.use_interventions);
  cfg.jobs = static_cast<int>(kv.get_int("run.jobs", 1));
  cfg.validate();
  const auto algo = discovery::parse_algorithm(kv.get_string("discovery.algo", "pc"));
  const Table all = io::read_table(input);
  const Table t = all.select_rows(rows_with_treatment(all, split_set(kv.get_string("discovery.train", "red,blue"))));
  auto columns = default_discovery_columns(t);
  if (auto v = kv.get("discovery.columns"); v && !v->empty()) {
    const auto s = split_set(*v);
    columns.assign(s.begin(), s.end());
  }
  const auto res = discovery::discover(algo, t, columns, cfg);
  stamp(out, kv, "discover");
  write_file((fs::path(out) / "cpdag.txt").string(), graph::cpdag_to_text(res.cpdag));
  write_file((fs::path(out) / "dag_edges.txt").string(),
             graph::edge_list_to_text(graph::to_edge_list(res.extension.dag)));
  write_file((fs::path(out) / "graph.dot").string(), graph::to_dot(res.cpdag, {}, discovery::to_string(algo)));
  std::cout << "discover: " << discovery::to_string(algo) << " on " << t.rows() << " rows, "
            << res.cpdag.directed_count() << " directed + " << res.cpdag.undirected_count() << " undirected edges, "
            << res.warnings << " warnings -> " << out << "\n";
  return 0;
}

gnn::ModelConfig model_config(const KeyValues& kv) {
  gnn::ModelConfig mc;
  mc.kind = gnn::parse_model_kind(kv.get_string("model.kind", "sage"));
  mc.hidden = static_cast<int>(kv.get_int("model.hidden", 16));
  mc.ancestor_neighborhood = kv.get_bool("model.ecc_ancestors", false);
  mc.sage_sample = static_cast<int>(kv.get_int("model.sage_sample", 0));
  mc.seed = static_cast<std::uint64_t>(kv.get_int("model.seed", 0));
  return mc;
}

int run_train(const KeyValues& kv) {
  const auto input = require(kv, "paths.input", "--input");
  const auto skel_path = require(kv, "paths.skeleton", "--skeleton");
  const auto ckpt = require(kv, "paths.checkpoint", "--out");
  const auto mc = model_config(kv);
  const Table all = numeric_only(io::read_table(input));
  const Table t = all.select_rows(rows_with_treatment(all, split_set(kv.get_string("model.train", "red,blue"))));
  auto skel = load_skeleton(skel_path, t);
  gnn::Model m(skel, mc);
  gnn::TrainConfig tc;
  tc.lr = kv.get_double("model.lr", -1.0);
  tc.epochs = static_cast<int>(kv.get_int("model.epochs", gnn::kDefaultEpochs));
  tc.seed = mc.seed;
  const auto res = gnn::train(m, gnn::build_instances(t, skel), tc);
  const auto dir = fs::path(ckpt).parent_path().string();
  stamp(dir.empty() ? "." : dir, kv, "train");
  m.save(ckpt);
  std::string hist;
  for (double l : res.loss_history) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g\n", l);
    hist += buf;
  }
  write_file(ckpt + ".loss.txt", hist);
  std::cout << "train: " << gnn::to_string(mc.kind) << " on " << t.rows() << " rows, final loss "
            << (res.loss_history.empty() ? 0.0 : res.loss_history.back()) << " -> " << ckpt << "\n";
  return 0;
}

int run_eval(const KeyValues& kv) {
  const auto input = require(kv, "paths.input", "--input");
  const auto skel_path = require(kv, "paths.skeleton", "--skeleton");
  const auto ckpt = require(kv, "paths.checkpoint", "--checkpoint");
  const Table all = numeric_only(io::read_table(input));
  const Table t = all.select_rows(rows_with_treatment(all, split_set(kv.get_string("eval.rows", "green"))));
  auto skel = load_skeleton(skel_path, t);
  const auto model = gnn::Model::load(ckpt, skel);
  const auto inst = gnn::build_instances(t, skel);
  const auto pred = model.predict(inst);
  const auto m = bench::evaluate(pred, gnn::stack_labels(inst));
  std::cout << metric_line(m);
  if (auto out = kv.get("paths.out_dir"); out && !out->empty()) {
    stamp(*out, kv, "eval");
    std::string csv = "field_id,date,label,prediction\n";
    for (std::size_t k = 0; k < inst.size(); ++k) {
      char buf[96];
      std::snprintf(buf, sizeof buf, ",%.10g,%.10g\n", inst[k].label, pred(static_cast<Eigen::Index>(k)));
      csv += inst[k].field_id + "," + format_iso_date(inst[k].date) + buf;
    }
    write_file((fs::path(*out) / "predictions.csv").string(), csv);
    write_file((fs::path(*out) / "metrics.txt").string(), metric_line(m));
  }
  return 0;
}

int run_baseline(const KeyValues& kv) {
  const auto input = require(kv, "paths.input", "--input");
  const Table all = numeric_only(io::read_table(input));
  const Table train = all.select_rows(rows_with_treatment(all, split_set(kv.get_string("baseline.train", "red,blue"))));
  const Table test = all.select_rows(rows_with_treatment(all, split_set(kv.get_string("baseline.test", "green"))));
  const auto seed = static_cast<std::uint64_t>(kv.get_int("baseline.seed", 0));
  const auto model = kv.get_string("baseline.model", "rf");
  Eigen::VectorXd pred;
  Eigen::VectorXd labels;
  if (model == "random-sage") {
    const auto skel = baselines::random_skeleton(train.schema.names(),
                                                 static_cast<std::size_t>(kv.get_int("baseline.random_edges", 50)),
                                                 train.schema.target(), seed);
    gnn::ModelConfig mc;
    mc.seed = seed;
    gnn::Model m(skel, mc);
    gnn::TrainConfig tc;
    tc.epochs = static_cast<int>(kv.get_int("model.epochs", gnn::kDefaultEpochs));
    tc.seed = seed;
    gnn::train(m, gnn::build_instances(train, skel), tc);
    const auto inst = gnn::build_instances(test, skel);
    pred = m.predict(inst);
    labels = gnn::stack_labels(inst);
  } else {
    const auto d_train = baselines::make_dataset(train);
    const auto d_test = baselines::make_dataset(test, d_train.features);
    labels = d_test.y;
    if (model == "rf") {
      baselines::RfConfig c;
      c.n_trees = static_cast<int>(kv.get_int("baseline.rf_trees", 100));
      c.seed = seed;
      c.jobs = static_cast<int>(kv.get_int("run.jobs", 1));
      pred = baselines::rf_train(d_train, c).predict(d_test.x);
    } else if (model == "gbt") {
      baselines::GbtConfig c;
      c.n_estimators = static_cast<int>(kv.get_int("baseline.gbt_estimators", 100));
      c.max_depth = static_cast<int>(kv.get_int("baseline.gbt_depth", 20));
      c.lr = kv.get_double("baseline.gbt_lr", 0.1);
      c.seed = seed;
      pred = baselines::gbt_train(d_train, c).predict(d_test.x);
    } else if (model == "mlp") {
      const auto g = baselines::mlp_grid_search(
          d_train, baselines::default_mlp_grid(static_cast<int>(kv.get_int("baseline.mlp_epochs", 300)), seed), 0.2,
          seed);
      pred = g.model.predict(d_test.x);
    } else {
      throw ConfigError("baseline", "unknown model '" + model + "' (expected mlp, rf, gbt or random-sage)");
    }
  }
  std::cout << metric_line(bench::evaluate(pred, labels));
  return 0;
}

int run_bench(const KeyValues& kv) {
  const auto out = kv.get_string("paths.out_dir", "bench_out");
  bench::BenchConfig cfg = bench::BenchConfig::from_kv(kv);
  cfg.jobs = static_cast<int>(kv.get_int("run.jobs", 1));
  cfg.discovery.jobs = 1;
  std::cout << "bench: " << cfg.seeds << " seeds, config " << cfg.hash() << "\n";
  const auto res = bench::run_matrix(cfg);
  bench::write_outputs(out, res, cfg);
  KeyValues snapshot = cfg.to_kv();
  snapshot.set("paths.out_dir", out);
  snapshot.set("run.jobs", std::to_string(cfg.jobs));
  stamp(out, snapshot, "bench");
  for (const auto& m : bench::summarize(res.rows)) {
    std::printf("  %-26s mse %.6g  mae %.6g  (%zu ok, %zu failed)\n", m.method.c_str(), m.median_mse, m.median_mae,
                m.ok, m.failed);
  }
  std::cout << "bench: results -> " << out << "\n";
  return 0;
}

int run_export_dot(const KeyValues& kv) {
  const auto out = require(kv, "paths.output", "--output");
  std::string dot;
  if (auto edges = kv.get("paths.edges"); edges && !edges->empty()) {
    const auto list = graph::edge_list_from_text(read_file(*edges));
    std::set<std::string> nodes;
    for (const auto& e : list) {
      nodes.insert(e.source);
      nodes.insert(e.target);
    }
    dot = graph::to_dot(graph::dag_from_edge_list({nodes.begin(), nodes.end()}, list), {}, "G");
  } else if (auto cp = kv.get("paths.cpdag"); cp && !cp->empty()) {
    std::set<std::string> nodes;
    std::vector<std::array<std::string, 3>> rows;
    std::stringstream ss(read_file(*cp));
    std::string line;
    while (std::getline(ss, line)) {
      if (line.empty()) continue;
      std::array<std::string, 3> f;
      std::stringstream ls(line);
      for (auto& x : f) {
        if (!std::getline(ls, x, '\t')) throw SchemaError("export-dot", "malformed cpdag line: " + line);
      }
      nodes.insert(f[0]);
      nodes.insert(f[1]);
      rows.push_back(f);
    }
    graph::Cpdag g({nodes.begin(), nodes.end()});
    for (const auto& f : rows) {
      const auto a = g.nodes().index_of(f[0]);
      const auto b = g.nodes().index_of(f[1]);
      if (f[2] == "directed") {
        g.set_directed(a, b);
      } else if (f[2] == "undirected") {
        g.set_undirected(a, b);
      } else {
        throw SchemaError("export-dot", "unknown edge kind '" + f[2] + "'");
      }
    }
    dot = graph::to_dot(g, {}, "G");
  } else {
    throw ConfigError("cli", "export-dot needs --edges or --cpdag");
  }
  write_file(out, dot);
  std::cout << "export-dot: -> " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal discovery and graph neural regression for soil carbon"};
  app.set_version_flag("--version", std::string("causalsoil ") + CAUSALSOIL_VERSION);
  app.add_option("--config", config_path, "Config file with section.key = value lines")->check(CLI::ExistingFile);
  app.require_subcommand(1);

  std::map<std::string, Command> cmds;
  auto sub = [&](const std::string& name, const std::string& help) -> Command& {
    auto& c = cmds[name];
    c.app = app.add_subcommand(name, help);
    c.flags.add(c.app, "--jobs", "run.jobs", "Worker threads (default 1)");
    return c;
  };

  {
    auto& c = sub("synth", "Sample the synthetic farm benchmark");
    c.flags.add(c.app, "--out-dir", "paths.out_dir", "Output directory");
    c.flags.add(c.app, "--n-days", "synth.n_days", "Days per field (default 365)");
    c.flags.add(c.app, "--seed", "synth.seed", "Master seed (default 0)");
    c.flags.add(c.app, "--noise-scale", "synth.noise_scale", "Multiplier on continuous noise (default 1)");
  }
  {
    auto& c = sub("ingest", "Merge, encode, add lag counts and scale a table");
    c.flags.add(c.app, "--input", "paths.input", "Input CSV path(s), comma separated; schema at <path>.schema");
    c.flags.add(c.app, "--out-dir", "paths.out_dir", "Output directory");
    c.flags.add(c.app, "--lag-windows", "ingest.lag_windows", "Lag windows in days (default 45,182,365,730)");
    c.flags.add(c.app, "--train", "ingest.train", "Treatments used to fit the scaler (default red,blue)");
  }
  {
    auto& c = sub("discover", "Learn a CPDAG with PC, GES or GIES");
    c.flags.add(c.app, "--input", "paths.input", "Model-ready CSV");
    c.flags.add(c.app, "--out-dir", "paths.out_dir", "Output directory");
    c.flags.add(c.app, "--algo", "discovery.algo", "pc | ges | gies (default pc)");
    c.flags.add(c.app, "--alpha", "discovery.alpha", "PC significance level (default 0.05)");
    c.flags.add(c.app, "--max-cond-size", "discovery.max_cond_size", "PC conditioning-set cap (default 3)");
    c.flags.add(c.app, "--max-parents", "discovery.max_parents", "Score-search parent cap (default 5)");
    c.flags.add(c.app, "--columns", "discovery.columns", "Variables, comma separated (default raw observables)");
    c.flags.add(c.app, "--train", "discovery.train", "Treatments to learn from (default red,blue)");
    c.flags.add(c.app, "--seed", "discovery.seed", "Seed (discovery is deterministic; recorded only)");
  }
  {
    auto& c = sub("train", "Train a GraphSAGE or ECC model on a skeleton");
    c.flags.add(c.app, "--input", "paths.input", "Model-ready CSV");
    c.flags.add(c.app, "--skeleton", "paths.skeleton", "Edge-list file (source<TAB>target<TAB>attr)");
    c.flags.add(c.app, "--out", "paths.checkpoint", "Checkpoint path");
    c.flags.add(c.app, "--model", "model.kind", "sage | ecc (default sage)");
    c.flags.add(c.app, "--lr", "model.lr", "Learning rate (default 0.0015 sage, 0.0020 ecc)");
    c.flags.add(c.app, "--epochs", "model.epochs", "Epochs (default 500)");
    c.flags.add(c.app, "--hidden", "model.hidden", "Hidden width (default 16)");
    c.flags.add(c.app, "--seed", "model.seed", "Seed (default 0)");
    c.flags.add(c.app, "--train", "model.train", "Training treatments (default red,blue)");
  }
  {
    auto& c = sub("eval", "Evaluate a checkpoint on held-out rows");
    c.flags.add(c.app, "--input", "paths.input", "Model-ready CSV");
    c.flags.add(c.app, "--skeleton", "paths.skeleton", "Edge-list file used for training");
    c.flags.add(c.app, "--checkpoint", "paths.checkpoint", "Checkpoint path");
    c.flags.add(c.app, "--rows", "eval.rows", "Treatments to evaluate on (default green)");
    c.flags.add(c.app, "--out-dir", "paths.out_dir", "Optional directory for predictions.csv");
  }
  {
    auto& c = sub("baseline", "Train and evaluate a non-causal baseline");
    c.flags.add(c.app, "--input", "paths.input", "Model-ready CSV");
    c.flags.add(c.app, "--model", "baseline.model", "mlp | rf | gbt | random-sage (default rf)");
    c.flags.add(c.app, "--seed", "baseline.seed", "Seed (default 0)");
  }
  {
    auto& c = sub("bench", "Run the full method x seed matrix");
    c.flags.add(c.app, "--seeds", "bench.seeds", "Number of seeds (default 5)");
    c.flags.add(c.app, "--seed", "bench.seed", "Master seed (default 0)");
    c.flags.add(c.app, "--n-days", "bench.n_days", "Days per field (default 80)");
    c.flags.add(c.app, "--epochs", "model.epochs", "GNN epochs (default 500)");
    c.flags.add(c.app, "--methods", "bench.methods", "Method keys, comma separated (default all)");
    c.flags.add(c.app, "--out-dir", "paths.out_dir", "Output directory");
  }
  {
    auto& c = sub("export-dot", "Render an edge list or CPDAG file as DOT");
    c.flags.add(c.app, "--edges", "paths.edges", "Edge-list file");
    c.flags.add(c.app, "--cpdag", "paths.cpdag", "CPDAG file (a<TAB>b<TAB>directed|undirected)");
    c.flags.add(c.app, "--output", "paths.output", "DOT output path");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::kUsage);
  }

  static const std::map<std::string, int (*)(const KeyValues&)> handlers{
      {"synth", run_synth},       {"ingest", run_ingest},   {"discover", run_discover},
      {"train", run_train},       {"eval", run_eval},       {"baseline", run_baseline},
      {"bench", run_bench},       {"export-dot", run_export_dot},
  };
  for (const auto& [name, cmd] : cmds) {
    if (!cmd.app->parsed()) continue;
    try {
      return handlers.at(name)(effective(cmd));
    } catch (const Error& e) {
      std::cerr << "error [" << name << "] " << e.what() << "\n";
      return static_cast<int>(e.code());
    } catch (const std::exception& e) {
      std::cerr << "error [" << name << "] " << e.what() << "\n";
      return static_cast<int>(ExitCode::kData);
    }
  }
  return static_cast<int>(ExitCode::kUsage);
}

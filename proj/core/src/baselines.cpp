#include "causalsoil/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "causalsoil/error.hpp"
#include "causalsoil/rng.hpp"

namespace causalsoil::baselines {

Dataset make_dataset(const Table& table) {
  std::vector<std::string> features;
  for (const auto& c : table.schema.columns()) {
    if (c.name == table.schema.target() || c.kind == ColumnKind::kCategorical) continue;
    features.push_back(c.name);
  }
  return make_dataset(table, features);
}

Dataset make_dataset(const Table& table, const std::vector<std::string>& features) {
  const auto t = table.schema.target_index();
  if (!t) throw SchemaError("make_dataset", "table has no target column");
  Dataset d;
  d.features = features;
  d.x.resize(static_cast<Eigen::Index>(table.rows()), static_cast<Eigen::Index>(features.size()));
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (features[k] == table.schema.target()) throw SchemaError("make_dataset", "target used as a feature");
    d.x.col(static_cast<Eigen::Index>(k)) =
        table.values.col(static_cast<Eigen::Index>(table.schema.index_of(features[k], "make_dataset")));
  }
  d.y = table.values.col(static_cast<Eigen::Index>(*t));
  return d;
}

double Tree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int at = 0;
  while (!nodes[static_cast<std::size_t>(at)].leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(at)];
    at = row(n.feature) <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(at)].value;
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes[i].leaf()) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

namespace {

struct Pending {
  int node;
  std::vector<std::size_t> rows;
  int depth;
};

}  // namespace

Tree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<std::size_t>& rows,
              const TreeParams& params, std::uint64_t seed) {
  if (rows.empty()) throw ConfigError("fit_tree", "no rows");
  if (params.min_leaf < 1) throw ConfigError("fit_tree", "min_leaf must be >= 1");
  const auto d = static_cast<int>(x.cols());
  const int mtry = params.max_features > 0 ? std::min(params.max_features, d) : d;
  Rng rng(seed);
  std::vector<int> all(static_cast<std::size_t>(d));
  std::iota(all.begin(), all.end(), 0);

  Tree tree;
  tree.nodes.emplace_back();
  std::vector<Pending> stack;
  stack.push_back({0, rows, 0});
  std::vector<std::pair<double, double>> vals;
  while (!stack.empty()) {
    Pending job = std::move(stack.back());
    stack.pop_back();
    const auto n = job.rows.size();
    double sum = 0.0;
    for (auto r : job.rows) sum += y(static_cast<Eigen::Index>(r));
    const double mean = sum / static_cast<double>(n);
    double sse = 0.0;
    for (auto r : job.rows) sse += (y(static_cast<Eigen::Index>(r)) - mean) * (y(static_cast<Eigen::Index>(r)) - mean);
    tree.nodes[static_cast<std::size_t>(job.node)].value = mean;
    const auto min_leaf = static_cast<std::size_t>(params.min_leaf);
    if (n < 2 * min_leaf || (params.max_depth >= 0 && job.depth >= params.max_depth) || sse <= 0.0) continue;

    std::vector<int> cand = all;
    if (mtry < d) {
      for (int k = 0; k < mtry; ++k) {
        std::uniform_int_distribution<int> pick(k, d - 1);
        std::swap(cand[static_cast<std::size_t>(k)], cand[static_cast<std::size_t>(pick(rng))]);
      }
      cand.resize(static_cast<std::size_t>(mtry));
      std::sort(cand.begin(), cand.end());
    }

    const double base = sum * sum / static_cast<double>(n);
    // Gains within this margin count as ties, which keep the earlier split.
    const double margin = 1e-12 * std::max(sse, 1e-300);
    double best_gain = margin;
    int best_f = -1;
    double best_t = 0.0;
    for (int f : cand) {
      vals.clear();
      for (auto r : job.rows) vals.emplace_back(x(static_cast<Eigen::Index>(r), f), y(static_cast<Eigen::Index>(r)));
      std::sort(vals.begin(), vals.end());
      double left = 0.0;
      for (std::size_t k = 1; k < n; ++k) {
        left += vals[k - 1].second;
        if (k < min_leaf || n - k < min_leaf || !(vals[k - 1].first < vals[k].first)) continue;
        const double right = sum - left;
        const double gain = left * left / static_cast<double>(k) + right * right / static_cast<double>(n - k) - base;
        if (gain > best_gain + (best_f < 0 ? 0.0 : margin)) {
          best_gain = gain;
          best_f = f;
          best_t = 0.5 * (vals[k - 1].first + vals[k].first);
          if (!(best_t < vals[k].first)) best_t = vals[k - 1].first;
        }
      }
    }
    if (best_f < 0) continue;
    std::vector<std::size_t> lrows;
    std::vector<std::size_t> rrows;
    for (auto r : job.rows) (x(static_cast<Eigen::Index>(r), best_f) <= best_t ? lrows : rrows).push_back(r);
    const int l = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[static_cast<std::size_t>(job.node)];
    node.feature = best_f;
    node.threshold = best_t;
    node.left = l;
    node.right = l + 1;
    stack.push_back({l + 1, std::move(rrows), job.depth + 1});
    stack.push_back({l, std::move(lrows), job.depth + 1});
  }
  return tree;
}

Eigen::VectorXd RandomForest::predict(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
  if (trees.empty()) return out;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(x.row(r));
    out(r) = s / static_cast<double>(trees.size());
  }
  return out;
}

RandomForest rf_train(const Dataset& data, const RfConfig& config) {
  if (config.n_trees < 1) throw ConfigError("rf_train", "n_trees must be >= 1");
  if (data.x.rows() == 0) throw ConfigError("rf_train", "no training rows");
  const auto n = static_cast<std::size_t>(data.x.rows());
  std::vector<std::size_t> canon(n);
  std::iota(canon.begin(), canon.end(), 0);
  std::stable_sort(canon.begin(), canon.end(), [&](std::size_t a, std::size_t b) {
    for (Eigen::Index c = 0; c < data.x.cols(); ++c) {
      const double u = data.x(static_cast<Eigen::Index>(a), c);
      const double v = data.x(static_cast<Eigen::Index>(b), c);
      if (u != v) return u < v;
    }
    return data.y(static_cast<Eigen::Index>(a)) < data.y(static_cast<Eigen::Index>(b));
  });
  TreeParams tp;
  tp.min_leaf = config.min_leaf;
  tp.max_features = config.max_features > 0
                        ? config.max_features
                        : std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(data.x.cols())))));

  RandomForest forest;
  forest.trees.resize(static_cast<std::size_t>(config.n_trees));
  auto grow = [&](std::size_t t) {
    const auto seed = derive_seed(config.seed, t);
    std::vector<std::size_t> rows;
    if (config.bootstrap) {
      Rng rng(derive_seed(seed, 0xb007));
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      rows.resize(n);
      for (auto& r : rows) r = canon[pick(rng)];
    } else {
      rows = canon;
    }
    forest.trees[t] = fit_tree(data.x, data.y, rows, tp, seed);
  };
  const auto workers = static_cast<std::size_t>(std::max(1, config.jobs));
  if (workers == 1) {
    for (std::size_t t = 0; t < forest.trees.size(); ++t) grow(t);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < forest.trees.size(); t += workers) grow(t);
      });
    }
    for (auto& th : pool) th.join();
  }
  return forest;
}

Eigen::VectorXd GradientBoosting::predict(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Constant(x.rows(), base);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (const auto& t : trees) out(r) += lr * t.predict(x.row(r));
  }
  return out;
}

GradientBoosting gbt_train(const Dataset& data, const GbtConfig& config) {
  if (config.n_estimators < 0) throw ConfigError("gbt_train", "n_estimators must be >= 0");
  if (data.x.rows() == 0) throw ConfigError("gbt_train", "no training rows");
  GradientBoosting m;
  m.base = data.y.mean();
  m.lr = config.lr;
  const auto n = static_cast<std::size_t>(data.x.rows());
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  TreeParams tp;
  tp.max_depth = config.max_depth;
  tp.min_leaf = config.min_leaf;
  Eigen::VectorXd pred = Eigen::VectorXd::Constant(data.x.rows(), m.base);
  m.train_mse.push_back((data.y - pred).squaredNorm() / static_cast<double>(n));
  for (int k = 0; k < config.n_estimators; ++k) {
    const Eigen::VectorXd resid = data.y - pred;
    m.trees.push_back(fit_tree(data.x, resid, rows, tp, derive_seed(config.seed, static_cast<std::uint64_t>(k))));
    for (Eigen::Index r = 0; r < data.x.rows(); ++r) pred(r) += m.lr * m.trees.back().predict(data.x.row(r));
    m.train_mse.push_back((data.y - pred).squaredNorm() / static_cast<double>(n));
  }
  return m;
}

std::vector<diff::Parameter*> Mlp::parameters() {
  std::vector<diff::Parameter*> out;
  for (auto& l : layers) {
    for (auto* p : l.parameters()) out.push_back(p);
  }
  return out;
}

Eigen::VectorXd Mlp::forward(const Eigen::MatrixXd& x) const {
  diff::Tensor a = x.transpose();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    a = diff::dense(layers[k], a);
    if (k + 1 < layers.size()) a = diff::relu(a);
  }
  return a.row(0).transpose();
}

double Mlp::loss_and_grad(const Eigen::MatrixXd& x, const Eigen::VectorXd& y_std) {
  for (auto* p : parameters()) p->zero_grad();
  std::vector<diff::Tensor> in;
  diff::Tensor a = x.transpose();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    in.push_back(a);
    a = diff::dense(layers[k], a);
    if (k + 1 < layers.size()) a = diff::relu(a);
  }
  const Eigen::VectorXd pred = a.row(0).transpose();
  const double loss = diff::mse(pred, y_std);
  diff::Tensor d = diff::mse_backward(pred, y_std).transpose();
  for (std::size_t k = layers.size(); k-- > 0;) {
    if (k + 1 < layers.size()) d = diff::relu_backward(in[k + 1], d);
    d = diff::dense_backward(layers[k], in[k], d);
  }
  return loss;
}

Eigen::VectorXd Mlp::predict(const Eigen::MatrixXd& x) const { return (forward(x).array() * scale + offset).matrix(); }

Mlp mlp_init(std::size_t n_features, const MlpConfig& config) {
  Mlp m;
  auto in = static_cast<Eigen::Index>(n_features);
  std::uint64_t stream = 0;
  for (int w : config.hidden) {
    if (w < 1) throw ConfigError("mlp", "hidden widths must be >= 1");
    m.layers.emplace_back("mlp" + std::to_string(m.layers.size()), in, w);
    diff::glorot_init(m.layers.back(), derive_seed(config.seed, stream++));
    in = w;
  }
  m.layers.emplace_back("mlp" + std::to_string(m.layers.size()), in, 1);
  diff::glorot_init(m.layers.back(), derive_seed(config.seed, stream++));
  return m;
}

Mlp mlp_train(const Dataset& data, const MlpConfig& config, std::vector<double>* loss_history) {
  if (data.x.rows() == 0) throw ConfigError("mlp_train", "no training rows");
  if (config.epochs < 0 || config.lr < 0) throw ConfigError("mlp_train", "epochs and lr must be >= 0");
  Mlp m = mlp_init(static_cast<std::size_t>(data.x.cols()), config);
  m.features = data.features;
  m.offset = data.y.mean();
  const double sd = std::sqrt((data.y.array() - m.offset).square().mean());
  m.scale = sd > 1e-12 ? sd : 1.0;
  const Eigen::VectorXd ys = (data.y.array() - m.offset) / m.scale;
  diff::AdamState adam;
  adam.lr = config.lr;
  const auto params = m.parameters();
  for (int e = 0; e < config.epochs; ++e) {
    const double loss = m.loss_and_grad(data.x, ys);
    if (!std::isfinite(loss)) throw NumericError("mlp_train", "non-finite loss at epoch " + std::to_string(e));
    if (loss_history) loss_history->push_back(loss * m.scale * m.scale);
    diff::adam_step(params, adam);
  }
  return m;
}

std::vector<MlpConfig> default_mlp_grid(int epochs, std::uint64_t seed) {
  std::vector<MlpConfig> grid;
  for (int layers : {1, 2, 3}) {
    for (int width : {16, 64, 128}) {
      for (double lr : {1e-3, 1e-2}) {
        MlpConfig c;
        c.hidden.assign(static_cast<std::size_t>(layers), width);
        c.lr = lr;
        c.epochs = epochs;
        c.seed = seed;
        grid.push_back(c);
      }
    }
  }
  return grid;
}

GridResult mlp_grid_search(const Dataset& data, const std::vector<MlpConfig>& grid, double val_fraction,
                           std::uint64_t seed) {
  if (grid.empty()) throw ConfigError("mlp_grid_search", "empty grid");
  if (!(val_fraction > 0 && val_fraction < 1)) throw ConfigError("mlp_grid_search", "val_fraction must lie in (0, 1)");
  const auto n = static_cast<std::size_t>(data.x.rows());
  const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n)));
  if (n_val < 1 || n_val >= n) throw ConfigError("mlp_grid_search", "too few rows for a validation split");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x7a1));
  std::shuffle(order.begin(), order.end(), rng);
  auto take = [&](std::size_t from, std::size_t to) {
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(from),
                                 order.begin() + static_cast<std::ptrdiff_t>(to));
    std::sort(idx.begin(), idx.end());
    Dataset d;
    d.features = data.features;
    d.x.resize(static_cast<Eigen::Index>(idx.size()), data.x.cols());
    d.y.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      d.x.row(static_cast<Eigen::Index>(k)) = data.x.row(static_cast<Eigen::Index>(idx[k]));
      d.y(static_cast<Eigen::Index>(k)) = data.y(static_cast<Eigen::Index>(idx[k]));
    }
    return d;
  };
  const Dataset val = take(0, n_val);
  const Dataset fit = take(n_val, n);

  GridResult out;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Mlp m = mlp_train(fit, grid[k]);
    const double v = diff::mse(m.predict(val.x), val.y);
    out.log.push_back({grid[k], v});
    if (k == 0 || v < out.log[out.best].val_mse) out.best = k;
  }
  out.model = mlp_train(data, grid[out.best]);
  return out;
}

gnn::GraphSkeleton random_skeleton(const std::vector<std::string>& labels, std::size_t n_edges,
                                   const std::string& target, std::uint64_t seed) {
  const auto n = labels.size();
  const std::size_t pairs = n < 2 ? 0 : n * (n - 1);
  if (n_edges > pairs) throw ConfigError("random_skeleton", "more edges requested than ordered node pairs");
  Rng rng(seed);
  std::vector<std::size_t> pool(pairs);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t k = 0; k < n_edges; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, pairs - 1);
    std::swap(pool[k], pool[pick(rng)]);
  }
  pool.resize(n_edges);
  std::sort(pool.begin(), pool.end());
  graph::EdgeList edges;
  for (auto p : pool) {
    const auto from = p / (n - 1);
    auto to = p % (n - 1);
    if (to >= from) ++to;
    edges.push_back({labels[from], labels[to], 1.0});
  }
  return gnn::GraphSkeleton::from_edges(labels, std::move(edges), target);
}

}  // namespace causalsoil::baselines

#include "causalsoil/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "causalsoil/error.hpp"
#include "causalsoil/rng.hpp"

namespace causalsoil::gnn {

GraphSkeleton GraphSkeleton::from_dag(const graph::Dag& dag, std::vector<std::string> columns,
                                      const std::string& target) {
  return from_edges(std::move(columns), graph::to_edge_list(dag), target);
}

GraphSkeleton GraphSkeleton::from_edges(std::vector<std::string> columns, graph::EdgeList edges,
                                        const std::string& target) {
  GraphSkeleton s;
  s.labels = std::move(columns);
  s.edges = std::move(edges);
  const auto it = std::find(s.labels.begin(), s.labels.end(), target);
  if (it == s.labels.end()) throw SchemaError("skeleton", "target '" + target + "' is not a node");
  s.target = static_cast<std::size_t>(it - s.labels.begin());
  s.validate();
  return s;
}

std::size_t GraphSkeleton::index_of(const std::string& label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw SchemaError("skeleton", "unknown node '" + label + "'");
  return static_cast<std::size_t>(it - labels.begin());
}

void GraphSkeleton::validate() const {
  std::set<std::string> seen(labels.begin(), labels.end());
  if (seen.size() != labels.size()) throw SchemaError("skeleton", "duplicate node label");
  if (target >= labels.size()) throw SchemaError("skeleton", "target index out of range");
  for (const auto& e : edges) {
    if (!seen.count(e.source) || !seen.count(e.target)) {
      throw SchemaError("skeleton", "edge " + e.source + "->" + e.target + " has an unknown endpoint");
    }
    if (e.source == e.target) throw SchemaError("skeleton", "self-loop on " + e.source);
  }
}

Neighborhoods in_neighbors(const GraphSkeleton& s) {
  Neighborhoods nb(s.labels.size());
  for (const auto& e : s.edges) nb[s.index_of(e.target)].push_back(s.index_of(e.source));
  for (auto& v : nb) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return nb;
}

Neighborhoods ancestor_neighbors(const GraphSkeleton& s) {
  const auto parents = in_neighbors(s);
  Neighborhoods out(parents.size());
  for (std::size_t i = 0; i < parents.size(); ++i) {
    std::vector<char> seen(parents.size(), 0);
    std::vector<std::size_t> stack = parents[i];
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      if (seen[u] || u == i) continue;
      seen[u] = 1;
      for (auto p : parents[u]) stack.push_back(p);
    }
    for (std::size_t u = 0; u < seen.size(); ++u) {
      if (seen[u]) out[i].push_back(u);
    }
  }
  return out;
}

std::vector<GraphInstance> build_instances(const Table& table, const GraphSkeleton& skeleton) {
  skeleton.validate();
  std::set<std::string> want(skeleton.labels.begin(), skeleton.labels.end());
  const auto names = table.schema.names();
  std::set<std::string> have(names.begin(), names.end());
  if (want != have) {
    for (const auto& n : want) {
      if (!have.count(n)) throw SchemaError("build_instances", "table lacks skeleton node '" + n + "'");
    }
    for (const auto& n : have) {
      if (!want.count(n)) throw SchemaError("build_instances", "table column '" + n + "' is not a skeleton node");
    }
  }
  std::vector<Eigen::Index> col(skeleton.labels.size());
  for (std::size_t i = 0; i < col.size(); ++i) {
    col[i] = static_cast<Eigen::Index>(table.schema.index_of(skeleton.labels[i], "build_instances"));
  }
  const auto target_col = col[skeleton.target];
  std::vector<GraphInstance> out(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    auto& g = out[r];
    const auto rr = static_cast<Eigen::Index>(r);
    g.x.resize(static_cast<Eigen::Index>(col.size()));
    for (std::size_t i = 0; i < col.size(); ++i) g.x(static_cast<Eigen::Index>(i)) = table.values(rr, col[i]);
    g.x(static_cast<Eigen::Index>(skeleton.target)) = 0.0;
    if (!g.x.allFinite()) throw SchemaError("build_instances", "non-finite feature in row " + std::to_string(r));
    g.label = table.values(rr, target_col);
    if (r < table.field_ids.size()) g.field_id = table.field_ids[r];
    if (r < table.dates.size()) g.date = table.dates[r];
    if (r < table.treatments.size()) g.treatment = table.treatments[r];
  }
  return out;
}

Eigen::MatrixXd stack_features(const std::vector<GraphInstance>& instances) {
  if (instances.empty()) return {};
  Eigen::MatrixXd x(instances.front().x.size(), static_cast<Eigen::Index>(instances.size()));
  for (std::size_t k = 0; k < instances.size(); ++k) x.col(static_cast<Eigen::Index>(k)) = instances[k].x;
  return x;
}

Eigen::VectorXd stack_labels(const std::vector<GraphInstance>& instances) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(instances.size()));
  for (std::size_t k = 0; k < instances.size(); ++k) y(static_cast<Eigen::Index>(k)) = instances[k].label;
  return y;
}

EccLayer::EccLayer(const std::string& name, Eigen::Index in_dim, Eigen::Index out_dim)
    : filter(name + ".F", 1, in_dim * out_dim), bias(name + ".b", out_dim, 1), in(in_dim), out(out_dim) {}

Tensor EccLayer::theta(double edge_attribute) const {
  const Eigen::VectorXd flat = filter.weight.value.col(0) * edge_attribute + filter.bias.value.col(0);
  return Eigen::Map<const Eigen::MatrixXd>(flat.data(), out, in);
}

namespace {

bool is_active(const std::vector<char>& active, std::size_t i) { return active.empty() || active[i] != 0; }

Eigen::Index batch_of(const std::vector<Tensor>& h) {
  for (const auto& t : h) {
    if (t.size() > 0) return t.cols();
  }
  return 0;
}

std::vector<const Tensor*> gather(const std::vector<Tensor>& h, const std::vector<std::size_t>& idx) {
  std::vector<const Tensor*> out;
  out.reserve(idx.size());
  for (auto j : idx) out.push_back(&h[j]);
  return out;
}

}  // namespace

std::vector<Tensor> sage_conv(const std::vector<Tensor>& h, const Neighborhoods& nb, const diff::DenseParams& p,
                              bool relu, const std::vector<char>& active) {
  const auto batch = batch_of(h);
  const auto in = p.in() / 2;
  std::vector<Tensor> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!is_active(active, i)) continue;
    const Tensor agg = nb[i].empty() ? Tensor(Tensor::Zero(in, batch)) : diff::mean_pool(gather(h, nb[i]));
    Tensor z = diff::dense(p, diff::concat(h[i], agg));
    out[i] = relu ? diff::relu(z) : std::move(z);
  }
  return out;
}

std::vector<Tensor> ecc_conv(const std::vector<Tensor>& h, const Neighborhoods& nb, const EccLayer& layer, bool relu,
                             const std::vector<char>& active) {
  const auto batch = batch_of(h);
  const Tensor theta = layer.theta();
  std::vector<Tensor> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!is_active(active, i)) continue;
    Tensor z;
    if (nb[i].empty()) {
      z = layer.bias.value.col(0).replicate(1, batch);
    } else {
      z = theta * diff::mean_pool(gather(h, nb[i]));
      z.colwise() += layer.bias.value.col(0);
    }
    out[i] = relu ? diff::relu(z) : std::move(z);
  }
  return out;
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "sage") return ModelKind::kSage;
  if (name == "ecc") return ModelKind::kEcc;
  throw ConfigError("model", "unknown model '" + name + "' (expected sage or ecc)");
}

std::string to_string(ModelKind kind) { return kind == ModelKind::kSage ? "sage" : "ecc"; }

struct Model::Cache {
  std::vector<std::vector<Tensor>> h;  // per layer 0..L
  std::vector<Tensor> head_in;
  std::vector<Tensor> head_out;
};

Model::Model(GraphSkeleton skeleton, ModelConfig config) : skeleton_(std::move(skeleton)), config_(config) {
  skeleton_.validate();
  if (config_.hidden < 1) throw ConfigError("model", "hidden width must be >= 1");
  if (config_.sage_sample < 0) throw ConfigError("model", "sage_sample must be >= 0");
  const bool sage = config_.kind == ModelKind::kSage;
  nb_ = (!sage && config_.ancestor_neighborhood) ? ancestor_neighbors(skeleton_) : in_neighbors(skeleton_);
  if (sage && config_.sage_sample > 0) {
    Rng rng(derive_seed(config_.seed, 0x5a6e));
    const auto k = static_cast<std::size_t>(config_.sage_sample);
    for (auto& v : nb_) {
      if (v.size() <= k) continue;
      std::shuffle(v.begin(), v.end(), rng);
      v.resize(k);
      std::sort(v.begin(), v.end());
    }
  }

  const Eigen::Index d = config_.hidden;
  std::uint64_t stream = 1;
  if (sage) {
    for (int l = 0; l < 3; ++l) {
      sage_.emplace_back("sage" + std::to_string(l), 2 * (l == 0 ? 1 : d), d);
      diff::glorot_init(sage_.back(), derive_seed(config_.seed, stream++));
    }
    for (int l = 0; l < 3; ++l) {
      head_.emplace_back("ff" + std::to_string(l), d, l == 2 ? 1 : d);
      diff::glorot_init(head_.back(), derive_seed(config_.seed, stream++));
    }
  } else {
    for (int l = 0; l < 2; ++l) {
      ecc_.emplace_back("ecc" + std::to_string(l), l == 0 ? 1 : d, d);
      diff::glorot_init(ecc_.back().filter, derive_seed(config_.seed, stream++));
    }
    head_.emplace_back("ff0", d, 1);
    diff::glorot_init(head_.back(), derive_seed(config_.seed, stream++));
  }

  // Receptive field of the target, layer by layer.
  const auto n = skeleton_.labels.size();
  const auto layers = conv_layers();
  active_.assign(layers + 1, std::vector<char>(n, 0));
  active_[layers][skeleton_.target] = 1;
  for (std::size_t l = layers; l > 0; --l) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!active_[l][i]) continue;
      active_[l - 1][i] = 1;
      for (auto u : nb_[i]) active_[l - 1][u] = 1;
    }
  }
}

std::size_t Model::conv_layers() const { return config_.kind == ModelKind::kSage ? sage_.size() : ecc_.size(); }

std::vector<diff::Parameter*> Model::parameters() {
  std::vector<diff::Parameter*> out;
  for (auto& p : sage_) {
    for (auto* q : p.parameters()) out.push_back(q);
  }
  for (auto& p : ecc_) {
    for (auto* q : p.parameters()) out.push_back(q);
  }
  for (auto& p : head_) {
    for (auto* q : p.parameters()) out.push_back(q);
  }
  return out;
}

void Model::set_target_scaling(double offset, double scale) {
  if (!std::isfinite(offset) || !(scale > 0) || !std::isfinite(scale)) {
    throw NumericError("model", "invalid target scaling");
  }
  offset_ = offset;
  scale_ = scale;
}

Eigen::VectorXd Model::run(const Eigen::MatrixXd& x, Cache* cache) const {
  const auto n = skeleton_.labels.size();
  if (static_cast<std::size_t>(x.rows()) != n) throw SchemaError("model", "feature rows do not match skeleton size");
  const auto layers = conv_layers();
  std::vector<Tensor> h(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (active_[0][i]) h[i] = x.row(static_cast<Eigen::Index>(i));
  }
  if (cache) cache->h.assign(1, h);
  for (std::size_t l = 1; l <= layers; ++l) {
    const bool relu = l < layers;
    h = config_.kind == ModelKind::kSage ? sage_conv(h, nb_, sage_[l - 1], relu, active_[l])
                                         : ecc_conv(h, nb_, ecc_[l - 1], relu, active_[l]);
    if (cache) cache->h.push_back(h);
  }
  Tensor a = h[skeleton_.target];
  for (std::size_t k = 0; k < head_.size(); ++k) {
    if (cache) cache->head_in.push_back(a);
    a = diff::dense(head_[k], a);
    if (k + 1 < head_.size()) a = diff::relu(a);
    if (cache) cache->head_out.push_back(a);
  }
  return a.row(0).transpose();
}

Eigen::VectorXd Model::forward(const Eigen::MatrixXd& x) const { return run(x, nullptr); }

double Model::loss_and_grad(const Eigen::MatrixXd& x, const Eigen::VectorXd& y_std) {
  for (auto* p : parameters()) p->zero_grad();
  Cache cache;
  const Eigen::VectorXd pred = run(x, &cache);
  const double loss = diff::mse(pred, y_std);
  Tensor d = diff::mse_backward(pred, y_std).transpose();
  for (std::size_t k = head_.size(); k-- > 0;) {
    if (k + 1 < head_.size()) d = diff::relu_backward(cache.head_out[k], d);
    d = diff::dense_backward(head_[k], cache.head_in[k], d);
  }

  const auto n = skeleton_.labels.size();
  const auto layers = conv_layers();
  std::vector<Tensor> grad(n);
  grad[skeleton_.target] = d;
  for (std::size_t l = layers; l >= 1; --l) {
    const auto& prev = cache.h[l - 1];
    const auto& cur = cache.h[l];
    std::vector<Tensor> down(n);
    auto add = [&](std::size_t j, const Tensor& g) {
      if (down[j].size() == 0) {
        down[j] = g;
      } else {
        down[j] += g;
      }
    };
    for (std::size_t i = 0; i < n; ++i) {
      if (!active_[l][i] || grad[i].size() == 0) continue;
      const Tensor dz = l < layers ? diff::relu_backward(cur[i], grad[i]) : grad[i];
      const auto& nbi = nb_[i];
      if (config_.kind == ModelKind::kSage) {
        auto& p = sage_[l - 1];
        const auto in = p.in() / 2;
        const Tensor agg = nbi.empty() ? Tensor(Tensor::Zero(in, dz.cols())) : diff::mean_pool(gather(prev, nbi));
        const Tensor dcat = diff::dense_backward(p, diff::concat(prev[i], agg), dz);
        auto [dself, dagg] = diff::concat_backward(dcat, in);
        add(i, dself);
        if (!nbi.empty()) {
          const Tensor share = diff::mean_pool_backward(dagg, nbi.size());
          for (auto u : nbi) add(u, share);
        }
      } else {
        auto& layer = ecc_[l - 1];
        layer.bias.grad.col(0) += dz.rowwise().sum();
        if (nbi.empty()) continue;
        const Tensor m = diff::mean_pool(gather(prev, nbi));
        const Tensor dtheta = dz * m.transpose();
        const Eigen::Map<const Eigen::VectorXd> flat(dtheta.data(), dtheta.size());
        layer.filter.weight.grad.col(0) += flat * 1.0;
        layer.filter.bias.grad.col(0) += flat;
        const Tensor share = diff::mean_pool_backward(layer.theta().transpose() * dz, nbi.size());
        for (auto u : nbi) add(u, share);
      }
    }
    grad = std::move(down);
  }
  return loss;
}

Eigen::VectorXd Model::predict(const Eigen::MatrixXd& x) const {
  return (forward(x).array() * scale_ + offset_).matrix();
}

Eigen::VectorXd Model::predict(const std::vector<GraphInstance>& instances) const {
  if (instances.empty()) return {};
  return predict(stack_features(instances));
}

void Model::save(const std::string& path) const {
  std::vector<std::pair<std::string, Tensor>> tensors;
  Tensor meta(6, 1);
  meta << (config_.kind == ModelKind::kSage ? 0.0 : 1.0), config_.hidden, config_.ancestor_neighborhood ? 1.0 : 0.0,
      config_.sage_sample, offset_, scale_;
  tensors.emplace_back("meta", meta);
  auto* self = const_cast<Model*>(this);
  for (auto* p : self->parameters()) tensors.emplace_back(p->name, p->value);
  diff::write_checkpoint(path, tensors);
}

Model Model::load(const std::string& path, GraphSkeleton skeleton) {
  const auto tensors = diff::read_checkpoint(path);
  if (tensors.empty() || tensors.front().first != "meta" || tensors.front().second.size() != 6) {
    throw SchemaError("load", path + ": missing model metadata");
  }
  const auto& meta = tensors.front().second;
  ModelConfig cfg;
  cfg.kind = meta(0) == 0.0 ? ModelKind::kSage : ModelKind::kEcc;
  cfg.hidden = static_cast<int>(meta(1));
  cfg.ancestor_neighborhood = meta(2) != 0.0;
  cfg.sage_sample = static_cast<int>(meta(3));
  Model m(std::move(skeleton), cfg);
  const auto params = m.parameters();
  if (tensors.size() != params.size() + 1) throw SchemaError("load", path + ": parameter count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& [name, t] = tensors[k + 1];
    if (name != params[k]->name || t.rows() != params[k]->value.rows() || t.cols() != params[k]->value.cols()) {
      throw SchemaError("load", path + ": tensor '" + name + "' does not fit the model");
    }
    params[k]->value = t;
  }
  m.set_target_scaling(meta(4), meta(5));
  return m;
}

TrainResult train(Model& model, const std::vector<GraphInstance>& instances, const TrainConfig& config) {
  if (instances.empty()) throw ConfigError("train", "no training instances");
  if (config.epochs < 0) throw ConfigError("train", "epochs must be >= 0");
  if (config.batch_size < 0) throw ConfigError("train", "batch_size must be >= 0");
  const Eigen::MatrixXd x = stack_features(instances);
  const Eigen::VectorXd y = stack_labels(instances);
  const double mean = y.mean();
  const double sd = std::sqrt((y.array() - mean).square().mean());
  model.set_target_scaling(mean, sd > 1e-12 ? sd : 1.0);
  const Eigen::VectorXd ys = (y.array() - model.offset()) / model.scale();

  diff::AdamState adam;
  adam.lr = config.lr >= 0 ? config.lr
                           : (model.config().kind == ModelKind::kSage ? kDefaultSageLr : kDefaultEccLr);
  const auto params = model.parameters();
  const double s2 = model.scale() * model.scale();
  const auto n = static_cast<std::size_t>(x.cols());
  const std::size_t batch = config.batch_size > 0 ? std::min<std::size_t>(config.batch_size, n) : n;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(config.seed, 0xba7c));

  TrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (batch == n) {
      const double loss = model.loss_and_grad(x, ys);
      if (!std::isfinite(loss)) {
        throw NumericError("train", "non-finite loss at epoch " + std::to_string(epoch) + " (lr " +
                                        std::to_string(adam.lr) + ")");
      }
      result.loss_history.push_back(loss * s2);
      diff::adam_step(params, adam);
      continue;
    }
    result.loss_history.push_back(diff::mse(model.forward(x), ys) * s2);
    if (!std::isfinite(result.loss_history.back())) {
      throw NumericError("train", "non-finite loss at epoch " + std::to_string(epoch));
    }
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t at = 0; at < n; at += batch) {
      const auto len = std::min(batch, n - at);
      Eigen::MatrixXd xb(x.rows(), static_cast<Eigen::Index>(len));
      Eigen::VectorXd yb(static_cast<Eigen::Index>(len));
      for (std::size_t k = 0; k < len; ++k) {
        xb.col(static_cast<Eigen::Index>(k)) = x.col(static_cast<Eigen::Index>(order[at + k]));
        yb(static_cast<Eigen::Index>(k)) = ys(static_cast<Eigen::Index>(order[at + k]));
      }
      model.loss_and_grad(xb, yb);
      diff::adam_step(params, adam);
    }
  }
  return result;
}

}  // namespace causalsoil::gnn

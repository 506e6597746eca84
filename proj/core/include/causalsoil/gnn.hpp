#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causalsoil/diff.hpp"
#include "causalsoil/graph.hpp"
#include "causalsoil/table.hpp"

namespace causalsoil::gnn {

using diff::Tensor;

struct GraphSkeleton {
  std::vector<std::string> labels;  // model-table feature columns incl. target
  graph::EdgeList edges;
  std::size_t target = 0;

  // Nodes are `columns`; edges come from `dag`, whose labels must be a subset.
  static GraphSkeleton from_dag(const graph::Dag& dag, std::vector<std::string> columns, const std::string& target);
  static GraphSkeleton from_edges(std::vector<std::string> columns, graph::EdgeList edges, const std::string& target);

  // Labels unique, target present, endpoints known, no self-loops.
  void validate() const;
  std::size_t index_of(const std::string& label) const;
};

// Per node, sorted neighbour indices.
using Neighborhoods = std::vector<std::vector<std::size_t>>;
Neighborhoods in_neighbors(const GraphSkeleton& skeleton);
Neighborhoods ancestor_neighbors(const GraphSkeleton& skeleton);

struct GraphInstance {
  Eigen::VectorXd x;  // one scalar per skeleton node; target masked to 0
  double label = 0.0;  // raw target value
  std::string field_id;
  Date date;
  std::string treatment;
};

// Columns are aligned to skeleton labels by name.
std::vector<GraphInstance> build_instances(const Table& table, const GraphSkeleton& skeleton);
// nodes x instances
Eigen::MatrixXd stack_features(const std::vector<GraphInstance>& instances);
Eigen::VectorXd stack_labels(const std::vector<GraphInstance>& instances);

struct EccLayer {
  diff::DenseParams filter;  // edge attribute (1) -> out*in, reshaped column-major
  diff::Parameter bias;      // out x 1
  Eigen::Index in = 0;
  Eigen::Index out = 0;

  EccLayer() = default;
  EccLayer(const std::string& name, Eigen::Index in_dim, Eigen::Index out_dim);
  Tensor theta(double edge_attribute = 1.0) const;
  std::vector<diff::Parameter*> parameters() { return {&filter.weight, &filter.bias, &bias}; }
};

// h_i <- act(W [h_i, mean_{u in N(i)} h_u] + b); empty N(i) aggregates to zero.
// Each h entry is (dim x batch). Nodes whose `active` flag is 0 are skipped
// and returned empty.
std::vector<Tensor> sage_conv(const std::vector<Tensor>& h, const Neighborhoods& nb, const diff::DenseParams& p,
                              bool relu, const std::vector<char>& active = {});
// h_i <- act(mean_{j in N(i)} Theta(E_ji) h_j + b); empty N(i) gives b.
std::vector<Tensor> ecc_conv(const std::vector<Tensor>& h, const Neighborhoods& nb, const EccLayer& layer,
                             bool relu, const std::vector<char>& active = {});

enum class ModelKind { kSage, kEcc };
ModelKind parse_model_kind(const std::string& name);
std::string to_string(ModelKind kind);

inline constexpr double kDefaultSageLr = 0.0015;
inline constexpr double kDefaultEccLr = 0.0020;
inline constexpr int kDefaultEpochs = 500;

struct ModelConfig {
  ModelKind kind = ModelKind::kSage;
  int hidden = 16;
  // ECC neighbourhood: all ancestors instead of parents.
  bool ancestor_neighborhood = false;
  // SAGE neighbour sampling; 0 keeps every in-neighbour.
  int sage_sample = 0;
  std::uint64_t seed = 0;
};

struct TrainConfig {
  double lr = -1.0;  // negative selects the per-model default
  int epochs = kDefaultEpochs;
  int batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;
};

// GraphSAGE: 3 convs + 3 dense layers. ECC: 2 convs + 1 dense layer.
// Readout is the target node's final embedding. Outputs are modelled on a
// standardized target scale fitted by train(); a fresh model has offset 0 and
// scale 1.
class Model {
 public:
  Model(GraphSkeleton skeleton, ModelConfig config);

  const GraphSkeleton& skeleton() const noexcept { return skeleton_; }
  const ModelConfig& config() const noexcept { return config_; }
  std::vector<diff::Parameter*> parameters();
  void set_target_scaling(double offset, double scale);
  double offset() const noexcept { return offset_; }
  double scale() const noexcept { return scale_; }

  // Standardized outputs for features (nodes x batch).
  Eigen::VectorXd forward(const Eigen::MatrixXd& x) const;
  // MSE on standardized labels; gradients are recomputed into parameters().
  double loss_and_grad(const Eigen::MatrixXd& x, const Eigen::VectorXd& y_std);

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;  // raw units
  Eigen::VectorXd predict(const std::vector<GraphInstance>& instances) const;

  void save(const std::string& path) const;
  static Model load(const std::string& path, GraphSkeleton skeleton);

  std::size_t conv_layers() const;

 private:
  struct Cache;
  Eigen::VectorXd run(const Eigen::MatrixXd& x, Cache* cache) const;

  GraphSkeleton skeleton_;
  ModelConfig config_;
  Neighborhoods nb_;
  std::vector<std::vector<char>> active_;  // per layer 0..L
  std::vector<diff::DenseParams> sage_;
  std::vector<EccLayer> ecc_;
  std::vector<diff::DenseParams> head_;
  double offset_ = 0.0;
  double scale_ = 1.0;
};

struct TrainResult {
  std::vector<double> loss_history;  // raw-unit training MSE per epoch, before the update
};

// Adam on MSE. Throws NumericError if the loss becomes non-finite.
TrainResult train(Model& model, const std::vector<GraphInstance>& instances, const TrainConfig& config);

}  // namespace causalsoil::gnn

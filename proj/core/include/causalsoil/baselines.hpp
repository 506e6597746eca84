#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causalsoil/diff.hpp"
#include "causalsoil/gnn.hpp"
#include "causalsoil/table.hpp"

namespace causalsoil::baselines {

// Flat design matrix: every numeric column except the target.
struct Dataset {
  Eigen::MatrixXd x;  // rows x features
  Eigen::VectorXd y;
  std::vector<std::string> features;
};

Dataset make_dataset(const Table& table);
// Same feature order as `like`; throws when a feature is missing.
Dataset make_dataset(const Table& table, const std::vector<std::string>& features);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  double value = 0.0;
  bool leaf() const noexcept { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  int depth() const;
};

struct TreeParams {
  int max_depth = -1;    // -1 = unlimited
  int min_leaf = 2;      // rows per child
  int max_features = 0;  // candidate features per split; 0 = all
};

// CART regression with variance-reduction splits over `rows` (indices into x).
// Thresholds are midpoints between consecutive distinct values; ties keep the
// first (lowest feature index, lowest threshold) best split.
Tree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<std::size_t>& rows,
              const TreeParams& params, std::uint64_t seed = 0);

struct RfConfig {
  int n_trees = 100;
  int min_leaf = 2;
  int max_features = 0;  // 0 = floor(sqrt(d)), at least 1
  bool bootstrap = true;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct RandomForest {
  std::vector<Tree> trees;
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

// Rows are put in canonical order before bootstrapping, so the forest does not
// depend on training row order.
RandomForest rf_train(const Dataset& data, const RfConfig& config);

struct GbtConfig {
  int n_estimators = 100;
  int max_depth = 20;
  double lr = 0.1;
  int min_leaf = 1;
  std::uint64_t seed = 0;
};

struct GradientBoosting {
  double base = 0.0;
  double lr = 0.1;
  std::vector<Tree> trees;
  std::vector<double> train_mse;  // after each round, starting with the constant model
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

GradientBoosting gbt_train(const Dataset& data, const GbtConfig& config);

struct MlpConfig {
  std::vector<int> hidden{64};
  double lr = 1e-3;
  int epochs = 300;
  std::uint64_t seed = 0;
};

// Dense -> ReLU stack with a linear output, trained full-batch with Adam on a
// standardized target.
struct Mlp {
  std::vector<std::string> features;
  std::vector<diff::DenseParams> layers;
  double offset = 0.0;
  double scale = 1.0;

  std::vector<diff::Parameter*> parameters();
  Eigen::VectorXd forward(const Eigen::MatrixXd& x) const;  // standardized, x is rows x features
  double loss_and_grad(const Eigen::MatrixXd& x, const Eigen::VectorXd& y_std);
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;  // raw units
};

Mlp mlp_init(std::size_t n_features, const MlpConfig& config);
Mlp mlp_train(const Dataset& data, const MlpConfig& config, std::vector<double>* loss_history = nullptr);

struct GridEntry {
  MlpConfig config;
  double val_mse = 0.0;
};

struct GridResult {
  std::vector<GridEntry> log;  // grid order
  std::size_t best = 0;
  Mlp model;                   // best config refit on all training rows
};

// {1,2,3} layers x widths {16,64,128} x lr {1e-3,1e-2}; validation = a seeded
// 20% hold-out of the training rows.
std::vector<MlpConfig> default_mlp_grid(int epochs, std::uint64_t seed);
GridResult mlp_grid_search(const Dataset& data, const std::vector<MlpConfig>& grid, double val_fraction,
                           std::uint64_t seed);

// `n_edges` distinct ordered non-self pairs drawn uniformly without replacement.
gnn::GraphSkeleton random_skeleton(const std::vector<std::string>& labels, std::size_t n_edges,
                                   const std::string& target, std::uint64_t seed);

}  // namespace causalsoil::baselines

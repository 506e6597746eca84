#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace causalsoil::diff {

// Two-dimensional float64 tensor; batched activations keep one sample per column.
using Tensor = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols);
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

struct DenseParams {
  Parameter weight;  // out x in
  Parameter bias;    // out x 1

  DenseParams() = default;
  DenseParams(const std::string& name, Eigen::Index in, Eigen::Index out);
  Eigen::Index in() const { return weight.value.cols(); }
  Eigen::Index out() const { return weight.value.rows(); }
  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
};

// Uniform on +-sqrt(6 / (fan_in + fan_out)); biases start at zero.
void glorot_init(DenseParams& p, std::uint64_t seed);

// y = W x + b per column.
Tensor dense(const DenseParams& p, const Tensor& x);
// Accumulates dW, db into p and returns dx.
Tensor dense_backward(DenseParams& p, const Tensor& x, const Tensor& dy);

Tensor relu(const Tensor& x);
// Subgradient 0 at x == 0.
Tensor relu_backward(const Tensor& x, const Tensor& dy);

Tensor concat(const Tensor& a, const Tensor& b);  // rows of a over rows of b
std::pair<Tensor, Tensor> concat_backward(const Tensor& dy, Eigen::Index rows_a);

// Elementwise mean of equally shaped tensors.
Tensor mean_pool(const std::vector<const Tensor*>& xs);
// Gradient for every input: dy / n.
Tensor mean_pool_backward(const Tensor& dy, std::size_t n);

double mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& target);
Eigen::VectorXd mse_backward(const Eigen::VectorXd& pred, const Eigen::VectorXd& target);
double mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& target);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

// Bias-corrected Adam update using each parameter's grad.
void adam_step(const std::vector<Parameter*>& params, AdamState& state);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;  // "<param>[r,c]"
  std::size_t checked = 0;
  bool pass = false;
};

// Central differences on every parameter entry. `loss` evaluates the scalar
// objective; `grads` zeroes and recomputes analytic gradients. The relative
// error is |a - n| / max(|a|, |n|, floor).
GradCheckReport finite_diff_check(const std::vector<Parameter*>& params, const std::function<double()>& loss,
                                  const std::function<void()>& grads, double tol = 1e-4, double h = 1e-5,
                                  double floor = 1e-6);

// Flat binary layout: magic "CSDF", u32 version, u64 count, then per tensor
// u64 name length, name bytes, u64 rows, u64 cols, rows*cols float64
// (column-major). All integers and floats little-endian.
void write_checkpoint(const std::string& path, const std::vector<std::pair<std::string, Tensor>>& tensors);
std::vector<std::pair<std::string, Tensor>> read_checkpoint(const std::string& path);

}  // namespace causalsoil::diff

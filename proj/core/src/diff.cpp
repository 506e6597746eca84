#include "causalsoil/diff.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "causalsoil/error.hpp"
#include "causalsoil/rng.hpp"

namespace causalsoil::diff {

Parameter::Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
    : name(std::move(n)), value(Tensor::Zero(rows, cols)), grad(Tensor::Zero(rows, cols)) {}

DenseParams::DenseParams(const std::string& name, Eigen::Index in, Eigen::Index out)
    : weight(name + ".W", out, in), bias(name + ".b", out, 1) {}

void glorot_init(DenseParams& p, std::uint64_t seed) {
  const double limit = std::sqrt(6.0 / static_cast<double>(p.in() + p.out()));
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Eigen::Index c = 0; c < p.weight.value.cols(); ++c) {
    for (Eigen::Index r = 0; r < p.weight.value.rows(); ++r) p.weight.value(r, c) = u(rng);
  }
  p.bias.value.setZero();
}

Tensor dense(const DenseParams& p, const Tensor& x) {
  if (x.rows() != p.in()) throw NumericError("dense", "input rows do not match layer width");
  Tensor y = p.weight.value * x;
  y.colwise() += p.bias.value.col(0);
  return y;
}

Tensor dense_backward(DenseParams& p, const Tensor& x, const Tensor& dy) {
  p.weight.grad.noalias() += dy * x.transpose();
  p.bias.grad.col(0) += dy.rowwise().sum();
  return p.weight.value.transpose() * dy;
}

Tensor relu(const Tensor& x) { return x.cwiseMax(0.0); }

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  return (x.array() > 0.0).select(dy, 0.0);
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw NumericError("concat", "column counts differ");
  Tensor y(a.rows() + b.rows(), a.cols());
  y.topRows(a.rows()) = a;
  y.bottomRows(b.rows()) = b;
  return y;
}

std::pair<Tensor, Tensor> concat_backward(const Tensor& dy, Eigen::Index rows_a) {
  return {dy.topRows(rows_a), dy.bottomRows(dy.rows() - rows_a)};
}

Tensor mean_pool(const std::vector<const Tensor*>& xs) {
  if (xs.empty()) throw NumericError("mean_pool", "no inputs");
  Tensor y = *xs.front();
  for (std::size_t k = 1; k < xs.size(); ++k) y += *xs[k];
  return y / static_cast<double>(xs.size());
}

Tensor mean_pool_backward(const Tensor& dy, std::size_t n) { return dy / static_cast<double>(n); }

double mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& target) {
  if (pred.size() != target.size() || pred.size() == 0) throw NumericError("mse", "size mismatch or empty");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

Eigen::VectorXd mse_backward(const Eigen::VectorXd& pred, const Eigen::VectorXd& target) {
  return 2.0 * (pred - target) / static_cast<double>(pred.size());
}

double mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& target) {
  if (pred.size() != target.size() || pred.size() == 0) throw NumericError("mae", "size mismatch or empty");
  return (pred - target).cwiseAbs().sum() / static_cast<double>(pred.size());
}

void adam_step(const std::vector<Parameter*>& params, AdamState& s) {
  if (s.m.size() != params.size()) {
    s.m.clear();
    s.v.clear();
    for (auto* p : params) {
      s.m.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
      s.v.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    s.m[k] = s.beta1 * s.m[k] + (1.0 - s.beta1) * p.grad;
    s.v[k] = s.beta2 * s.v[k] + (1.0 - s.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= s.lr * (s.m[k].array() / c1) / ((s.v[k].array() / c2).sqrt() + s.eps);
  }
}

GradCheckReport finite_diff_check(const std::vector<Parameter*>& params, const std::function<double()>& loss,
                                  const std::function<void()>& grads, double tol, double h, double floor) {
  grads();
  std::vector<Tensor> analytic;
  for (auto* p : params) analytic.push_back(p->grad);
  GradCheckReport rep;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& v = params[k]->value;
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      for (Eigen::Index r = 0; r < v.rows(); ++r) {
        const double keep = v(r, c);
        v(r, c) = keep + h;
        const double up = loss();
        v(r, c) = keep - h;
        const double down = loss();
        v(r, c) = keep;
        const double num = (up - down) / (2 * h);
        const double a = analytic[k](r, c);
        const double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), floor});
        ++rep.checked;
        if (rel > rep.max_rel_error || rep.worst.empty()) {
          rep.max_rel_error = rel;
          rep.worst = params[k]->name + "[" + std::to_string(r) + "," + std::to_string(c) + "]";
        }
      }
    }
  }
  rep.pass = rep.max_rel_error < tol;
  return rep;
}

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw SchemaError("read_checkpoint", path + ": truncated");
  return v;
}

constexpr char kMagic[4] = {'C', 'S', 'D', 'F'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void write_checkpoint(const std::string& path, const std::vector<std::pair<std::string, Tensor>>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ExitCode::kData, "write_checkpoint", "cannot open " + path);
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    put<std::uint64_t>(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.cols()));
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(sizeof(double) * t.size()));
  }
  if (!out) throw Error(ExitCode::kData, "write_checkpoint", "write failed for " + path);
}

std::vector<std::pair<std::string, Tensor>> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("read_checkpoint", "cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw SchemaError("read_checkpoint", path + ": not a checkpoint");
  }
  if (get<std::uint32_t>(in, path) != kVersion) throw SchemaError("read_checkpoint", path + ": unsupported version");
  const auto count = get<std::uint64_t>(in, path);
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = get<std::uint64_t>(in, path);
    if (len > (1u << 20)) throw SchemaError("read_checkpoint", path + ": corrupt name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(len))) throw SchemaError("read_checkpoint", path + ": truncated");
    const auto rows = get<std::uint64_t>(in, path);
    const auto cols = get<std::uint64_t>(in, path);
    if (rows > (1u << 24) || cols > (1u << 24)) throw SchemaError("read_checkpoint", path + ": corrupt shape");
    Tensor t(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(sizeof(double) * t.size()))) {
      throw SchemaError("read_checkpoint", path + ": truncated");
    }
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

}  // namespace causalsoil::diff

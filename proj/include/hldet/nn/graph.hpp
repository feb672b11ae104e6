#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hldet/common.hpp"

namespace hldet::nn {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A trainable tensor that outlives any single Graph. Optimizer moments live here too.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;
  bool trainable = true;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Owns parameters in registration order; names are unique.
class ParameterSet {
 public:
  Parameter& add(std::string name, Matrix init);
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;
  Parameter& at(std::string_view name);

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  /// Parameters whose name starts with `prefix`.
  std::vector<Parameter*> with_prefix(std::string_view prefix);

  void set_trainable(bool on);
  void set_trainable(std::string_view prefix, bool on);
  void zero_grad();
  std::size_t count() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Graph;

/// Handle to a node in a Graph. Cheap to copy; valid while its Graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* g, int id) : graph_(g), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  float scalar() const { return value()(0, 0); }
  Graph* graph() const { return graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

/// Tape of operations recorded in creation order; backward() sweeps it in reverse.
/// Single-threaded; build one Graph per step.
class Graph {
 public:
  using Backward = std::function<void(Graph&)>;

  explicit Graph(bool grad_enabled = true, Rng* rng = nullptr)
      : grad_enabled_(grad_enabled), rng_(rng) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  /// Leaf that reads the parameter in place and accumulates into its grad.
  Var param(Parameter& p);
  /// Records an op result. `backward` is only invoked if the node received a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Matrix value, const std::vector<Var>& inputs, Backward backward);

  void backward(Var loss);

  const Matrix& value(int id) const;
  /// Gradient buffer for node `id`, zero-initialized on first access.
  Matrix& grad(int id);
  bool has_grad(int id) const { return nodes_[id].grad.size() > 0; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  bool needs_grad(Var v) const { return nodes_[v.id()].needs_grad; }

  bool grad_enabled() const { return grad_enabled_; }
  bool training() const { return training_; }
  void set_training(bool on) { training_ = on; }
  Rng& rng();

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix owned;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool needs_grad = false;
    Backward backward;
  };

  bool grad_enabled_;
  bool training_ = true;
  Rng* rng_;
  std::vector<Node> nodes_;
};

}  // namespace hldet::nn

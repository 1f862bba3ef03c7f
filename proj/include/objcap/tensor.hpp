#ifndef OBJCAP_TENSOR_HPP
#define OBJCAP_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace objcap {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using Shape = std::vector<std::size_t>;

/// Raised when operand shapes are incompatible. The message names both shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_string(const Shape& shape);

/// Dense row-major tensor of rank 1 or 2 with an optional gradient buffer.
///
/// Tensor is a handle: copies share storage, so a parameter captured by a
/// tape node and the same parameter held by a model are one object. A
/// rank-1 tensor of length n is stored as a 1xn matrix.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, Matrix value, bool requires_grad = false);
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows,
                          bool requires_grad = false);
  static Tensor vector(std::initializer_list<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return static_cast<std::size_t>(node_->value.size()); }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) const { node_->requires_grad = flag; }

  bool has_grad() const { return node_->grad.size() != 0; }
  /// Gradient buffer; empty until the first backward pass touches this tensor.
  const Matrix& grad() const { return node_->grad; }
  // Handle semantics: gradient mutation goes through const handles, as with
  // shared_ptr.
  Matrix& grad_buffer() const;
  void zero_grad() const;
  void accumulate_grad(const Matrix& g) const;

  double item() const;
  double operator()(Eigen::Index r, Eigen::Index c) const { return node_->value(r, c); }

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  struct Node {
    Shape shape;
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Node> node_;
};

/// Ordered record of differentiable operations.
///
/// Operations append a node only when recording is enabled and at least one
/// operand requires a gradient. Nodes are appended after their operands
/// exist, so reverse insertion order is a valid reverse topological order.
class Tape {
 public:
  using BackwardRule = std::function<void(const Matrix& out_grad)>;

  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  /// Registers `output` as produced from differentiable operands. Returns false
  /// (and records nothing) when gradient tracking is not needed.
  bool record(const std::vector<Tensor>& operands, Tensor& output, BackwardRule rule);

  /// Reverse sweep from a scalar loss. Gradients accumulate into existing
  /// leaf buffers; call zero_grad on parameters between optimizer steps.
  void backward(const Tensor& loss);

 private:
  struct Node {
    Tensor output;
    BackwardRule rule;
  };
  bool recording_;
  bool consumed_ = false;
  std::vector<Node> nodes_;
};

void backward(const Tensor& loss, Tape& tape);

}  // namespace objcap

#endif  // OBJCAP_TENSOR_HPP

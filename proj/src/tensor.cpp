#include "objcap/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace objcap {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape, const Matrix& value) {
  if (shape.empty() || shape.size() > 2) {
    throw DimensionError("tensor rank must be 1 or 2, got shape " + shape_string(shape));
  }
  std::size_t n = 1;
  for (auto d : shape) {
    if (d == 0) throw DimensionError("zero extent in shape " + shape_string(shape));
    n *= d;
  }
  if (n != static_cast<std::size_t>(value.size())) {
    throw DimensionError("data length " + std::to_string(value.size()) +
                         " does not match shape " + shape_string(shape));
  }
  const auto rows = shape.size() == 1 ? std::size_t{1} : shape[0];
  if (static_cast<std::size_t>(value.rows()) != rows) {
    throw DimensionError("storage layout does not match shape " + shape_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  check_shape(shape, value);
  node_->shape = std::move(shape);
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  Shape shape{static_cast<std::size_t>(value.rows()), static_cast<std::size_t>(value.cols())};
  check_shape(shape, value);
  node_->shape = std::move(shape);
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const Eigen::Index rows = shape.size() == 1 ? 1 : static_cast<Eigen::Index>(shape.at(0));
  const Eigen::Index cols = static_cast<Eigen::Index>(shape.back());
  return Tensor(std::move(shape), Matrix::Zero(rows, cols), requires_grad);
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows,
                         bool requires_grad) {
  if (rows.size() == 0) throw DimensionError("from_rows: no rows");
  const auto cols = rows.begin()->size();
  Matrix m(rows.size(), cols);
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    if (row.size() != cols) throw DimensionError("from_rows: ragged rows");
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return Tensor(std::move(m), requires_grad);
}

Tensor Tensor::vector(std::initializer_list<double> values, bool requires_grad) {
  Matrix m(1, values.size());
  Eigen::Index c = 0;
  for (double v : values) m(0, c++) = v;
  return Tensor(Shape{values.size()}, std::move(m), requires_grad);
}

Matrix& Tensor::grad_buffer() const {
  if (node_->grad.size() == 0) node_->grad = Matrix::Zero(node_->value.rows(), node_->value.cols());
  return node_->grad;
}

void Tensor::zero_grad() const {
  if (node_->grad.size() != 0) node_->grad.setZero();
}

void Tensor::accumulate_grad(const Matrix& g) const {
  Matrix& buf = grad_buffer();
  if (g.rows() != buf.rows() || g.cols() != buf.cols()) {
    throw DimensionError("gradient shape mismatch for tensor " + shape_string(node_->shape));
  }
  buf += g;
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on non-scalar tensor " + shape_string(shape()));
  return node_->value(0, 0);
}

bool Tape::record(const std::vector<Tensor>& operands, Tensor& output, BackwardRule rule) {
  if (!recording_) return false;
  const bool any = std::any_of(operands.begin(), operands.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return false;
  output.set_requires_grad(true);
  nodes_.push_back(Node{output, std::move(rule)});
  return true;
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw DimensionError("backward requires a scalar loss, got shape " + shape_string(loss.shape()));
  }
  if (consumed_) throw std::logic_error("tape already consumed by a backward pass");
  consumed_ = true;
  if (!loss.requires_grad()) return;
  loss.accumulate_grad(Matrix::Ones(1, 1));
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    it->rule(it->output.grad());
  }
}

void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

}  // namespace objcap

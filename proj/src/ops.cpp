#include "objcap/ops.hpp"

#include <cmath>
#include <string>

namespace objcap {

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// Result keeps the operand's declared shape (rank-1 stays rank-1).
Tensor like(const Tensor& ref, Matrix value) { return Tensor(ref.shape(), std::move(value)); }

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Matrix c = a.value() * b.value();
  Tensor out(std::move(c));
  tape.record({a, b}, out, [a, b](const Matrix& g) {
    if (a.requires_grad()) a.grad_buffer().noalias() += g * b.value().transpose();
    if (b.requires_grad()) b.grad_buffer().noalias() += a.value().transpose() * g;
  });
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Tensor out = like(a, a.value() + b.value());
  tape.record({a, b}, out, [a, b](const Matrix& g) {
    if (a.requires_grad()) a.grad_buffer() += g;
    if (b.requires_grad()) b.grad_buffer() += g;
  });
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  Tensor out = like(a, a.value().cwiseProduct(b.value()));
  tape.record({a, b}, out, [a, b](const Matrix& g) {
    if (a.requires_grad()) a.grad_buffer() += g.cwiseProduct(b.value());
    if (b.requires_grad()) b.grad_buffer() += g.cwiseProduct(a.value());
  });
  return out;
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  Matrix s = x.value().unaryExpr([](double v) {
    // Split on sign so exp never overflows.
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  Tensor out = like(x, std::move(s));
  tape.record({x}, out, [x, out](const Matrix& g) {
    const Matrix& s = out.value();
    x.grad_buffer() += g.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
  });
  return out;
}

Tensor tanh(Tape& tape, const Tensor& x) {
  Tensor out = like(x, x.value().array().tanh().matrix());
  tape.record({x}, out, [x, out](const Matrix& g) {
    const Matrix& t = out.value();
    x.grad_buffer() += g.cwiseProduct((1.0 - t.array().square()).matrix());
  });
  return out;
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
  Tensor out = like(x, x.value() * factor);
  tape.record({x}, out, [x, factor](const Matrix& g) { x.grad_buffer() += g * factor; });
  return out;
}

Tensor add_rowvector(Tape& tape, const Tensor& x, const Tensor& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    throw DimensionError("add_rowvector: bias " + shape_string(bias.shape()) +
                         " does not fit rows of " + shape_string(x.shape()));
  }
  Matrix v = x.value();
  v.rowwise() += bias.value().row(0);
  Tensor out = like(x, std::move(v));
  tape.record({x, bias}, out, [x, bias](const Matrix& g) {
    if (x.requires_grad()) x.grad_buffer() += g;
    if (bias.requires_grad()) bias.grad_buffer() += g.colwise().sum();
  });
  return out;
}

Tensor concat(Tape& tape, std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw DimensionError("concat: empty input list");
  if (axis != 0 && axis != 1) throw DimensionError("concat: axis must be 0 or 1");
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    const bool ok = axis == 0 ? p.cols() == parts[0].cols() : p.rows() == parts[0].rows();
    if (!ok) {
      throw DimensionError("concat: incompatible shapes " + shape_string(parts[0].shape()) +
                           " and " + shape_string(p.shape()) + " along axis " +
                           std::to_string(axis));
    }
    if (axis == 0) {
      rows += p.rows();
      cols = p.cols();
    } else {
      cols += p.cols();
      rows = p.rows();
    }
  }
  Matrix v(rows, cols);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    if (axis == 0) {
      v.middleRows(offset, p.rows()) = p.value();
      offset += p.rows();
    } else {
      v.middleCols(offset, p.cols()) = p.value();
      offset += p.cols();
    }
  }
  // A row of rank-1 pieces joined along columns stays rank-1.
  const bool all_rank1 = std::all_of(parts.begin(), parts.end(),
                                     [](const Tensor& t) { return t.shape().size() == 1; });
  Tensor out = (axis == 1 && all_rank1)
                   ? Tensor(Shape{static_cast<std::size_t>(cols)}, std::move(v))
                   : Tensor(std::move(v));
  std::vector<Tensor> operands(parts.begin(), parts.end());
  tape.record(operands, out, [operands, axis](const Matrix& g) {
    Eigen::Index off = 0;
    for (auto& p : operands) {
      const Eigen::Index extent = axis == 0 ? p.rows() : p.cols();
      if (p.requires_grad()) {
        if (axis == 0) {
          p.grad_buffer() += g.middleRows(off, extent);
        } else {
          p.grad_buffer() += g.middleCols(off, extent);
        }
      }
      off += extent;
    }
  });
  return out;
}

Tensor concat(Tape& tape, std::initializer_list<Tensor> parts, int axis) {
  return concat(tape, std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor slice_cols(Tape& tape, const Tensor& x, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count <= 0 || begin + count > x.cols()) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + shape_string(x.shape()));
  }
  Matrix v = x.value().middleCols(begin, count);
  Tensor out = x.shape().size() == 1 ? Tensor(Shape{static_cast<std::size_t>(count)}, std::move(v))
                                     : Tensor(std::move(v));
  tape.record({x}, out, [x, begin, count](const Matrix& g) {
    x.grad_buffer().middleCols(begin, count) += g;
  });
  return out;
}

Tensor slice_rows(Tape& tape, const Tensor& x, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count <= 0 || begin + count > x.rows()) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + shape_string(x.shape()));
  }
  Tensor out(Matrix(x.value().middleRows(begin, count)));
  tape.record({x}, out, [x, begin, count](const Matrix& g) {
    x.grad_buffer().middleRows(begin, count) += g;
  });
  return out;
}

Tensor gather_row(Tape& tape, const Tensor& table, std::size_t index) {
  if (index >= static_cast<std::size_t>(table.rows())) {
    throw std::out_of_range("gather_row: index " + std::to_string(index) + " outside table " +
                            shape_string(table.shape()));
  }
  const auto r = static_cast<Eigen::Index>(index);
  Tensor out(Matrix(table.value().row(r)));
  tape.record({table}, out, [table, r](const Matrix& g) {
    table.grad_buffer().row(r) += g.row(0);
  });
  return out;
}

Tensor shift_rows(Tape& tape, const Tensor& x, Eigen::Index offset) {
  const Eigen::Index n = x.rows();
  Matrix v = Matrix::Zero(n, x.cols());
  const Eigen::Index moved = n - std::abs(offset);
  if (moved > 0) {
    if (offset >= 0) {
      v.bottomRows(moved) = x.value().topRows(moved);
    } else {
      v.topRows(moved) = x.value().bottomRows(moved);
    }
  }
  Tensor out = like(x, std::move(v));
  tape.record({x}, out, [x, offset, moved](const Matrix& g) {
    if (moved <= 0) return;
    if (offset >= 0) {
      x.grad_buffer().topRows(moved) += g.bottomRows(moved);
    } else {
      x.grad_buffer().bottomRows(moved) += g.topRows(moved);
    }
  });
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  Tensor out(Shape{1}, Matrix::Constant(1, 1, x.value().sum()));
  tape.record({x}, out, [x](const Matrix& g) { x.grad_buffer().array() += g(0, 0); });
  return out;
}

RowVector softmax_row(const Eigen::Ref<const RowVector>& logits) {
  RowVector e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

RowVector log_softmax_row(const Eigen::Ref<const RowVector>& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

Tensor softmax(Tape& tape, const Tensor& x) {
  Matrix s(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) s.row(r) = softmax_row(x.value().row(r));
  Tensor out = like(x, std::move(s));
  tape.record({x}, out, [x, out](const Matrix& g) {
    const Matrix& s = out.value();
    Matrix& gx = x.grad_buffer();
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      const double dot = g.row(r).dot(s.row(r));
      gx.row(r).array() += s.row(r).array() * (g.row(r).array() - dot);
    }
  });
  return out;
}

Tensor cross_entropy_rows(Tape& tape, const Tensor& logits, std::span<const std::size_t> targets) {
  if (targets.size() != static_cast<std::size_t>(logits.rows())) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + shape_string(logits.shape()));
  }
  const auto vocab = static_cast<std::size_t>(logits.cols());
  double total = 0.0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] >= vocab) {
      throw std::out_of_range("cross_entropy: target " + std::to_string(targets[r]) +
                              " outside [0, " + std::to_string(vocab) + ")");
    }
    const auto row = logits.value().row(static_cast<Eigen::Index>(r));
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    total += lse - row(static_cast<Eigen::Index>(targets[r]));
  }
  Tensor out(Shape{1}, Matrix::Constant(1, 1, total));
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  tape.record({logits}, out, [logits, tgt](const Matrix& g) {
    Matrix& gl = logits.grad_buffer();
    const double scale_by = g(0, 0);
    for (std::size_t r = 0; r < tgt.size(); ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      RowVector p = softmax_row(logits.value().row(ri));
      p(static_cast<Eigen::Index>(tgt[r])) -= 1.0;
      gl.row(ri) += scale_by * p;
    }
  });
  return out;
}

Tensor cross_entropy(Tape& tape, const Tensor& logits, std::size_t target) {
  if (logits.rows() != 1) {
    throw DimensionError("cross_entropy: expected a single row of logits, got " +
                         shape_string(logits.shape()));
  }
  const std::size_t t[1] = {target};
  return cross_entropy_rows(tape, logits, t);
}

}  // namespace objcap

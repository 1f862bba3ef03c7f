#include "objcap/layers.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "objcap/init.hpp"
#include "objcap/ops.hpp"

namespace objcap {

DenseParams DenseParams::create(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed) {
  return DenseParams{seeded_init(InitKind::uniform_glorot, {in_dim, out_dim}, derive_seed(seed, 0)),
                     seeded_init(InitKind::zeros, {out_dim}, derive_seed(seed, 1))};
}

LstmParams LstmParams::create(std::size_t input_dim, std::size_t hidden, std::uint64_t seed) {
  LstmParams p;
  p.hidden = hidden;
  p.input_weight =
      seeded_init(InitKind::uniform_glorot, {input_dim, 4 * hidden}, derive_seed(seed, 0));
  p.recurrent_weight =
      seeded_init(InitKind::uniform_glorot, {hidden, 4 * hidden}, derive_seed(seed, 1));
  p.bias = seeded_init(InitKind::zeros, {4 * hidden}, derive_seed(seed, 2));
  p.bias.mutable_value().middleCols(static_cast<Eigen::Index>(hidden),
                                    static_cast<Eigen::Index>(hidden)).setOnes();
  return p;
}

EmbeddingTable EmbeddingTable::create(std::size_t vocab_size, std::size_t embed_dim,
                                      std::uint64_t seed) {
  return EmbeddingTable{
      seeded_init(InitKind::uniform_glorot, {vocab_size, embed_dim}, derive_seed(seed, 0)), true};
}

EmbeddingTable EmbeddingTable::frozen(Matrix values) {
  return EmbeddingTable{Tensor(std::move(values), false), false};
}

LstmState LstmState::zeros(std::size_t hidden) {
  return LstmState{Tensor::zeros({1, hidden}), Tensor::zeros({1, hidden})};
}

Tensor embed(Tape& tape, const EmbeddingTable& table, std::size_t index) {
  if (index >= table.vocab_size()) {
    throw std::out_of_range("embed: index " + std::to_string(index) + " outside vocabulary of " +
                            std::to_string(table.vocab_size()));
  }
  if (!table.trainable) {
    Tape inert(false);
    return gather_row(inert, table.table, index);
  }
  return gather_row(tape, table.table, index);
}

Tensor dense(Tape& tape, const DenseParams& p, const Tensor& x) {
  if (static_cast<std::size_t>(x.cols()) != p.in_dim()) {
    throw DimensionError("dense: input " + shape_string(x.shape()) + " does not match weight " +
                         shape_string(p.weight.shape()));
  }
  return add_rowvector(tape, matmul(tape, x, p.weight), p.bias);
}

namespace {

void check_state(const LstmParams& p, const LstmState& s) {
  const auto h = static_cast<Eigen::Index>(p.hidden);
  if (s.h.rows() != 1 || s.h.cols() != h || s.c.rows() != 1 || s.c.cols() != h) {
    throw DimensionError("lstm: state " + shape_string(s.h.shape()) + "/" +
                         shape_string(s.c.shape()) + " does not match hidden size " +
                         std::to_string(p.hidden));
  }
}

// Gate arithmetic given the precomputed input projection x * W (1 x 4h).
LstmState gate_update(Tape& tape, const LstmParams& p, const Tensor& projected,
                      const LstmState& s) {
  const auto h = static_cast<Eigen::Index>(p.hidden);
  Tensor z = add_rowvector(tape, add(tape, projected, matmul(tape, s.h, p.recurrent_weight)), p.bias);
  Tensor i = sigmoid(tape, slice_cols(tape, z, 0, h));
  Tensor f = sigmoid(tape, slice_cols(tape, z, h, h));
  Tensor g = tanh(tape, slice_cols(tape, z, 2 * h, h));
  Tensor o = sigmoid(tape, slice_cols(tape, z, 3 * h, h));
  Tensor c = add(tape, mul(tape, f, s.c), mul(tape, i, g));
  Tensor hn = mul(tape, o, tanh(tape, c));
  return LstmState{hn, c};
}

void check_input(const LstmParams& p, const Tensor& x) {
  if (x.rows() != 1 || static_cast<std::size_t>(x.cols()) != p.input_dim()) {
    throw DimensionError("lstm: input " + shape_string(x.shape()) + " does not match weight " +
                         shape_string(p.input_weight.shape()));
  }
}

}  // namespace

LstmState lstm_step(Tape& tape, const LstmParams& p, const Tensor& x, const LstmState& state) {
  check_input(p, x);
  check_state(p, state);
  return gate_update(tape, p, matmul(tape, x, p.input_weight), state);
}

std::vector<Tensor> lstm_unroll(Tape& tape, const LstmParams& p, std::span<const Tensor> inputs,
                                const LstmState& initial) {
  if (inputs.empty()) throw std::invalid_argument("lstm_unroll: empty input sequence");
  for (const auto& x : inputs) check_input(p, x);
  check_state(p, initial);

  const Tensor stacked = inputs.size() == 1 ? inputs[0] : concat(tape, inputs, 0);
  const Tensor projected = matmul(tape, stacked, p.input_weight);
  std::vector<Tensor> hidden;
  hidden.reserve(inputs.size());
  LstmState state = initial;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const Tensor row = inputs.size() == 1
                           ? projected
                           : slice_rows(tape, projected, static_cast<Eigen::Index>(t), 1);
    state = gate_update(tape, p, row, state);
    hidden.push_back(state.h);
  }
  return hidden;
}

std::vector<Tensor> bilstm(Tape& tape, const LstmParams& forward, const LstmParams& backward,
                           std::span<const Tensor> inputs) {
  if (inputs.empty()) throw std::invalid_argument("bilstm: empty input sequence");
  std::vector<Tensor> fwd = lstm_unroll(tape, forward, inputs, LstmState::zeros(forward.hidden));
  std::vector<Tensor> reversed(inputs.rbegin(), inputs.rend());
  std::vector<Tensor> bwd = lstm_unroll(tape, backward, reversed, LstmState::zeros(backward.hidden));
  std::reverse(bwd.begin(), bwd.end());
  std::vector<Tensor> out;
  out.reserve(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) out.push_back(concat(tape, {fwd[t], bwd[t]}, 1));
  return out;
}

Tensor vocab_head(Tape& tape, const DenseParams& p, const Tensor& h) {
  if (static_cast<std::size_t>(h.cols()) != p.in_dim()) {
    throw DimensionError("vocab_head: hidden " + shape_string(h.shape()) +
                         " does not match weight " + shape_string(p.weight.shape()));
  }
  return dense(tape, p, h);
}

}  // namespace objcap

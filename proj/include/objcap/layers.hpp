#ifndef OBJCAP_LAYERS_HPP
#define OBJCAP_LAYERS_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "objcap/tensor.hpp"

namespace objcap {

/// Affine map x * weight + bias. weight is in_dim x out_dim, bias has out_dim entries.
struct DenseParams {
  Tensor weight;
  Tensor bias;

  static DenseParams create(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed);
  std::size_t in_dim() const { return static_cast<std::size_t>(weight.rows()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.cols()); }
};

/// LSTM parameters with gate blocks laid out along columns in the fixed
/// order (input i, forget f, cell g, output o), each block `hidden` wide.
struct LstmParams {
  Tensor input_weight;      // input_dim x 4h
  Tensor recurrent_weight;  // h x 4h
  Tensor bias;              // 4h
  std::size_t hidden = 0;

  /// Glorot weights, zero bias except the forget block which starts at 1.
  static LstmParams create(std::size_t input_dim, std::size_t hidden, std::uint64_t seed);
  std::size_t input_dim() const { return static_cast<std::size_t>(input_weight.rows()); }
};

struct EmbeddingTable {
  Tensor table;  // vocab_size x embed_dim
  bool trainable = true;

  static EmbeddingTable create(std::size_t vocab_size, std::size_t embed_dim, std::uint64_t seed);
  static EmbeddingTable frozen(Matrix values);
  std::size_t vocab_size() const { return static_cast<std::size_t>(table.rows()); }
  std::size_t embed_dim() const { return static_cast<std::size_t>(table.cols()); }
};

struct LstmState {
  Tensor h;  // 1 x hidden
  Tensor c;  // 1 x hidden

  static LstmState zeros(std::size_t hidden);
};

Tensor embed(Tape& tape, const EmbeddingTable& table, std::size_t index);

/// x is n x in_dim; each row is mapped independently.
Tensor dense(Tape& tape, const DenseParams& p, const Tensor& x);

LstmState lstm_step(Tape& tape, const LstmParams& p, const Tensor& x, const LstmState& state);

/// Left-to-right unroll returning every hidden state (1 x h each). The input
/// projection for all steps is computed with one matrix product.
std::vector<Tensor> lstm_unroll(Tape& tape, const LstmParams& p, std::span<const Tensor> inputs,
                                const LstmState& initial);

/// Aligned bidirectional outputs: position t holds concat(forward_h[t], backward_h[t]),
/// where the backward stream runs over the reversed input and is re-reversed.
std::vector<Tensor> bilstm(Tape& tape, const LstmParams& forward, const LstmParams& backward,
                           std::span<const Tensor> inputs);

/// Raw vocabulary logits for each row of h.
Tensor vocab_head(Tape& tape, const DenseParams& p, const Tensor& h);

}  // namespace objcap

#endif  // OBJCAP_LAYERS_HPP

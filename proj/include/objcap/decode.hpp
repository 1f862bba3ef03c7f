#ifndef OBJCAP_DECODE_HPP
#define OBJCAP_DECODE_HPP

#include <cstddef>
#include <vector>

#include "objcap/models.hpp"

namespace objcap {

/// Recurrent state carried between inference steps.
struct DecodeState {
  LstmState language;  // m1, m2
  LstmState decoder;
};

DecodeState initial_decode_state(const Model& model);

/// Log-probabilities of the next token after feeding `token`; advances state.
/// m2 uses only its forward direction here; the backward half of the head
/// input is zero because no right context exists during generation.
RowVector next_token_log_probs(const Model& model, const Tensor& encoding, DecodeState& state,
                               std::size_t token);

/// A generated caption. tokens excludes <start> and <end>; ended tells
/// whether <end> was emitted (otherwise generation hit max_caption_len).
/// score is log_prob divided by the number of emitted tokens, <end> included.
struct Hypothesis {
  std::vector<std::size_t> tokens;
  bool ended = false;
  double log_prob = 0;
  double score = 0;
};

/// Argmax decoding; ties go to the lowest token index.
Hypothesis decode_greedy(const Model& model, const Tensor& encoding);

/// Length-normalized beam search. Width 1 reproduces decode_greedy, and the
/// greedy caption always competes in the final selection, so the result
/// never scores below it. Ties prefer the lexicographically smaller sequence.
Hypothesis decode_beam(const Model& model, const Tensor& encoding, std::size_t width);

/// Normalized score of a given caption under the step decoder.
double sequence_score(const Model& model, const Tensor& encoding,
                      const std::vector<std::size_t>& tokens, bool ended);

/// Encoding computed without gradient tracking.
Tensor inference_encoding(const Model& model, const Example& example);

}  // namespace objcap

#endif  // OBJCAP_DECODE_HPP

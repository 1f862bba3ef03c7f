#include "objcap/decode.hpp"

#include <algorithm>
#include <stdexcept>

#include "objcap/ops.hpp"

namespace objcap {

namespace {

std::size_t argmax_lowest(const RowVector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return static_cast<std::size_t>(best);
}

struct Beam {
  Hypothesis hyp;
  DecodeState state;
};

// Higher score first; ties resolved by the token sequence.
bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.tokens != b.tokens) return a.tokens < b.tokens;
  return a.ended && !b.ended;
}

double normalized(double log_prob, std::size_t emitted) {
  return emitted == 0 ? 0.0 : log_prob / static_cast<double>(emitted);
}

}  // namespace

DecodeState initial_decode_state(const Model& model) {
  const auto& cfg = model.config();
  DecodeState s;
  if (cfg.variant != Variant::m3) s.language = LstmState::zeros(cfg.lang_hidden);
  s.decoder = LstmState::zeros(cfg.decoder_hidden);
  return s;
}

RowVector next_token_log_probs(const Model& model, const Tensor& encoding, DecodeState& state,
                               std::size_t token) {
  const auto& cfg = model.config();
  Tape tape(false);
  Tensor text = embed(tape, model.word_embedding, token);
  if (cfg.variant != Variant::m3) {
    state.language = lstm_step(tape, model.language, text, state.language);
    text = state.language.h;
  }
  state.decoder = lstm_step(tape, model.decoder, concat(tape, {encoding, text}, 1), state.decoder);
  Tensor top = state.decoder.h;
  if (cfg.variant == Variant::m2) {
    top = concat(tape, {top, Tensor::zeros({1, cfg.decoder_hidden})}, 1);
  }
  const Tensor logits = vocab_head(tape, model.head, top);
  return log_softmax_row(logits.value().row(0));
}

Hypothesis decode_greedy(const Model& model, const Tensor& encoding) {
  const std::size_t limit = model.config().max_caption_len;
  DecodeState state = initial_decode_state(model);
  Hypothesis hyp;
  std::size_t token = Vocabulary::kStart;
  std::size_t emitted = 0;
  while (emitted < limit) {
    const RowVector lp = next_token_log_probs(model, encoding, state, token);
    token = argmax_lowest(lp);
    hyp.log_prob += lp(static_cast<Eigen::Index>(token));
    ++emitted;
    if (token == Vocabulary::kEnd) {
      hyp.ended = true;
      break;
    }
    hyp.tokens.push_back(token);
  }
  hyp.score = normalized(hyp.log_prob, emitted);
  return hyp;
}

Hypothesis decode_beam(const Model& model, const Tensor& encoding, std::size_t width) {
  if (width == 0) throw std::invalid_argument("decode_beam: width must be positive");
  const std::size_t limit = model.config().max_caption_len;

  std::vector<Hypothesis> finished;
  std::vector<Beam> alive;
  alive.push_back(Beam{Hypothesis{}, initial_decode_state(model)});

  struct Candidate {
    std::size_t parent;
    std::size_t token;
    double log_prob;
  };

  for (std::size_t step = 0; step < limit && !alive.empty(); ++step) {
    std::vector<Candidate> candidates;
    std::vector<DecodeState> next_states;
    next_states.reserve(alive.size());
    for (std::size_t b = 0; b < alive.size(); ++b) {
      DecodeState s = alive[b].state;
      const std::size_t last =
          alive[b].hyp.tokens.empty() ? Vocabulary::kStart : alive[b].hyp.tokens.back();
      const RowVector lp = next_token_log_probs(model, encoding, s, last);
      next_states.push_back(std::move(s));
      for (Eigen::Index t = 0; t < lp.size(); ++t) {
        candidates.push_back({b, static_cast<std::size_t>(t), alive[b].hyp.log_prob + lp(t)});
      }
    }
    // All alive beams have equal length, so raw log-probability ranks them.
    const std::size_t keep = std::min(width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), [](const Candidate& a, const Candidate& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<Beam> next;
    for (std::size_t k = 0; k < keep; ++k) {
      const auto& c = candidates[k];
      Hypothesis h = alive[c.parent].hyp;
      h.log_prob = c.log_prob;
      const std::size_t emitted = step + 1;
      if (c.token == Vocabulary::kEnd) {
        h.ended = true;
        h.score = normalized(h.log_prob, emitted);
        finished.push_back(std::move(h));
      } else {
        h.tokens.push_back(c.token);
        h.score = normalized(h.log_prob, emitted);
        next.push_back(Beam{std::move(h), next_states[c.parent]});
      }
    }
    alive = std::move(next);
  }
  for (auto& b : alive) finished.push_back(std::move(b.hyp));

  Hypothesis best = decode_greedy(model, encoding);
  for (auto& h : finished) {
    if (better(h, best)) best = h;
  }
  return best;
}

double sequence_score(const Model& model, const Tensor& encoding,
                      const std::vector<std::size_t>& tokens, bool ended) {
  DecodeState state = initial_decode_state(model);
  double total = 0;
  std::size_t prev = Vocabulary::kStart;
  for (std::size_t t : tokens) {
    total += next_token_log_probs(model, encoding, state, prev)(static_cast<Eigen::Index>(t));
    prev = t;
  }
  std::size_t emitted = tokens.size();
  if (ended) {
    total += next_token_log_probs(model, encoding, state, prev)(
        static_cast<Eigen::Index>(Vocabulary::kEnd));
    ++emitted;
  }
  return normalized(total, emitted);
}

Tensor inference_encoding(const Model& model, const Example& example) {
  Tape tape(false);
  return encode(tape, model, example);
}

}  // namespace objcap

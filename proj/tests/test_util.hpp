#ifndef OBJCAP_TEST_UTIL_HPP
#define OBJCAP_TEST_UTIL_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "objcap/decode.hpp"
#include "objcap/models.hpp"
#include "objcap/ops.hpp"
#include "objcap/tensor.hpp"

namespace objcap::testing {

/// Uniform [-1, 1] matrix from a fixed seed.
inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

inline Tensor random_tensor(Eigen::Index rows, Eigen::Index cols, unsigned seed,
                            bool requires_grad = true) {
  return Tensor(random_matrix(rows, cols, seed), requires_grad);
}

/// Relative error with magnitudes floored at 1e-3, so gradients that are
/// essentially zero are judged by an absolute error of 1e-7.
inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
  return std::abs(analytic - numeric) / scale;
}

/// Central finite-difference oracle. Computes the analytic gradient of
/// `loss` with respect to every tensor in `wrt` through the tape, then
/// perturbs entries one at a time and re-evaluates the forward pass only.
/// At most `max_entries` entries per tensor are probed (evenly strided).
/// Returns the largest relative error seen.
inline double gradient_check(const std::function<Tensor(Tape&)>& loss,
                             const std::vector<Tensor>& wrt, double step = 1e-5,
                             Eigen::Index max_entries = 1 << 30) {
  for (const auto& t : wrt) t.zero_grad();
  {
    Tape tape;
    Tensor l = loss(tape);
    backward(l, tape);
  }
  double worst = 0;
  for (Tensor t : wrt) {
    const Matrix analytic = t.has_grad() ? t.grad() : Matrix::Zero(t.rows(), t.cols());
    const Eigen::Index n = t.mutable_value().size();
    const Eigen::Index stride = std::max<Eigen::Index>(1, n / max_entries);
    for (Eigen::Index i = 0; i < n; i += stride) {
      double& v = t.mutable_value().data()[i];
      const double saved = v;
      v = saved + step;
      Tape plus(false);
      const double fp = loss(plus).item();
      v = saved - step;
      Tape minus(false);
      const double fm = loss(minus).item();
      v = saved;
      const double numeric = (fp - fm) / (2 * step);
      worst = std::max(worst, relative_error(analytic.data()[i], numeric));
    }
  }
  return worst;
}

/// Small dimensions for end-to-end checks: 3 word tokens after the 4
/// reserved ones, 2 objects, short captions.
inline ModelConfig tiny_config(Variant variant, std::size_t vocab_size = 7,
                               std::uint64_t seed = 1) {
  ModelConfig c;
  c.variant = variant;
  c.visual_dim = 5;
  c.reduced_dim = 3;
  c.text_embed_dim = 4;
  c.lang_hidden = 3;
  c.decoder_hidden = 4;
  c.label_embed_dim = 2;
  c.max_objects = 2;
  c.vocab_size = vocab_size;
  c.max_caption_len = 3;
  c.rng_seed = seed;
  return c;
}

/// Builds a model and, for m3, installs a random two-label table.
inline Model tiny_model(const ModelConfig& config) {
  Model m = Model::build(config);
  if (config.variant == Variant::m3) {
    m.set_label_table({"cat", "dog"},
                      random_matrix(3, static_cast<Eigen::Index>(config.label_embed_dim),
                                    static_cast<unsigned>(config.rng_seed) + 500));
  }
  return m;
}

/// Multiplies every trainable parameter by `factor` so output distributions
/// are far from uniform.
inline void sharpen(const Model& model, double factor) {
  for (auto p : model.parameters()) p.tensor.mutable_value() *= factor;
}

inline Example tiny_example(const Model& model, unsigned seed, std::vector<std::size_t> caption) {
  const auto dim = static_cast<Eigen::Index>(model.config().visual_dim);
  Example ex;
  ex.id = "ex" + std::to_string(seed);
  if (model.config().variant == Variant::m3) {
    ex.objects.push_back({random_matrix(1, dim, seed), 1, 2.0});
    ex.objects.push_back({random_matrix(1, dim, seed + 1), 2, 1.0});
  } else {
    ex.image_feature = RowVector(random_matrix(1, dim, seed));
  }
  ex.caption = std::move(caption);
  return ex;
}

/// log p(tokens [, <end>]) computed from the teacher-forced logits, row by row.
inline double teacher_forced_log_prob(const Model& model, Example ex,
                                      const std::vector<std::size_t>& tokens, bool ended) {
  ex.caption = {Vocabulary::kStart};
  ex.caption.insert(ex.caption.end(), tokens.begin(), tokens.end());
  if (ended) ex.caption.push_back(Vocabulary::kEnd);
  Tape tape(false);
  const Matrix logits = forward_teacher_forced(tape, model, ex).value();
  double total = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
    total += logits(r, static_cast<Eigen::Index>(ex.caption[r + 1])) - lse;
  }
  return total;
}

/// Brute-force search over every caption the decoder could emit: all
/// sequences of non-<end> tokens that either end with <end> within the
/// length limit or run to it. Ranked by per-token log-probability (the
/// <end> token counted), ties to the lexicographically smaller sequence.
inline Hypothesis exhaustive_best(const Model& model, const Example& ex) {
  const std::size_t vocab = model.config().vocab_size;
  const std::size_t limit = model.config().max_caption_len;
  Hypothesis best;
  bool have = false;
  std::vector<std::vector<std::size_t>> frontier = {{}};
  for (std::size_t len = 0; len <= limit; ++len) {
    std::vector<std::vector<std::size_t>> grown;
    for (const auto& seq : frontier) {
      for (bool ended : {true, false}) {
        if (ended && len == limit) continue;
        if (!ended && len < limit) continue;
        if (seq.empty() && !ended) continue;
        Hypothesis h;
        h.tokens = seq;
        h.ended = ended;
        h.log_prob = teacher_forced_log_prob(model, ex, seq, ended);
        h.score = h.log_prob / static_cast<double>(seq.size() + (ended ? 1 : 0));
        const bool wins = !have || h.score > best.score ||
                          (h.score == best.score && h.tokens < best.tokens);
        if (wins) {
          best = h;
          have = true;
        }
      }
      if (len < limit) {
        for (std::size_t t = 0; t < vocab; ++t) {
          if (t == Vocabulary::kEnd) continue;
          auto next = seq;
          next.push_back(t);
          grown.push_back(std::move(next));
        }
      }
    }
    frontier = std::move(grown);
  }
  return best;
}

}  // namespace objcap::testing

#endif  // OBJCAP_TEST_UTIL_HPP

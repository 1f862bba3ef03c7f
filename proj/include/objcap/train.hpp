#ifndef OBJCAP_TRAIN_HPP
#define OBJCAP_TRAIN_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "objcap/bleu.hpp"
#include "objcap/data.hpp"
#include "objcap/models.hpp"

namespace objcap {

enum class OptimizerKind { sgd, adam };

/// Which references become training pairs: only the first, or all five.
enum class CaptionMode { first, all };

struct TrainConfig {
  std::size_t epochs = 15;
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  OptimizerKind optimizer = OptimizerKind::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::optional<double> grad_clip_norm = 5.0;
  std::uint64_t rng_seed = 7;
  CaptionMode caption_mode = CaptionMode::all;
  /// Stop once an epoch's mean training loss falls below this value.
  std::optional<double> target_loss;
  /// When false the seconds column is written as 0 so histories are reproducible.
  bool record_wall_time = false;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0;  // nats per predicted token
  std::optional<double> val_bleu;
  double seconds = 0;
};

struct RunHistory {
  std::vector<EpochStats> epochs;

  /// epoch,train_loss,val_bleu,seconds
  std::string to_csv() const;
};

/// An image to caption plus its tokenized references.
struct EvalItem {
  Example example;
  std::vector<TokenList> references;
};

std::vector<Example> make_training_set(const Model& model, const std::vector<ImageRecord>& records,
                                       const Vocabulary& vocab, CaptionMode mode);
std::vector<EvalItem> make_eval_set(const Model& model, const std::vector<ImageRecord>& records,
                                    const Vocabulary& vocab);

/// Mean cross-entropy per predicted token, without updating anything.
double mean_loss(const Model& model, const std::vector<Example>& examples);

using EpochCallback = std::function<void(const EpochStats&)>;

/// Teacher-forced minibatch training. Each batch's summed loss is divided
/// by its token count before clipping and the optimizer step. Validation
/// BLEU-4 is measured after every epoch when val is non-empty.
RunHistory train(Model& model, const std::vector<Example>& train_set,
                 const std::vector<EvalItem>& val_set, const Vocabulary& vocab,
                 const TrainConfig& config, const EpochCallback& on_epoch = {});

struct EvaluationResult {
  BleuReport report;
  std::size_t max_n = 4;
  /// Decoded captions, sorted by image id.
  std::vector<std::pair<std::string, TokenList>> hypotheses;
};

/// Greedy-decodes every item and scores corpus BLEU against all references.
/// Decoding may use several threads; aggregation always runs in image-id order.
EvaluationResult evaluate(const Model& model, const std::vector<EvalItem>& items,
                          const Vocabulary& vocab, std::size_t max_n = 4,
                          std::size_t threads = 0);

TokenList render_tokens(const Vocabulary& vocab, const std::vector<std::size_t>& tokens);

}  // namespace objcap

#endif  // OBJCAP_TRAIN_HPP

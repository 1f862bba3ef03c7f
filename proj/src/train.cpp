#include "objcap/train.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <future>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "objcap/decode.hpp"
#include "objcap/ops.hpp"

namespace objcap {

namespace {

std::string shortest(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class Optimizer {
 public:
  Optimizer(std::vector<NamedParameter> params, const TrainConfig& cfg)
      : params_(std::move(params)), cfg_(cfg) {
    if (cfg.optimizer == OptimizerKind::adam) {
      for (const auto& p : params_) {
        first_.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
        second_.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  void scale_grad(double factor) {
    for (auto& p : params_) {
      if (p.tensor.has_grad()) p.tensor.grad_buffer() *= factor;
    }
  }

  void clip(double max_norm) {
    double sq = 0;
    for (const auto& p : params_) {
      if (p.tensor.has_grad()) sq += p.tensor.grad().squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) scale_grad(max_norm / norm);
  }

  void step() {
    ++steps_;
    const double lr = cfg_.learning_rate;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = params_[i].tensor;
      if (!p.has_grad()) continue;
      const Matrix& g = p.grad();
      if (cfg_.optimizer == OptimizerKind::sgd) {
        p.mutable_value() -= lr * g;
        continue;
      }
      const double b1 = cfg_.adam_beta1;
      const double b2 = cfg_.adam_beta2;
      first_[i] = b1 * first_[i] + (1.0 - b1) * g;
      second_[i] = b2 * second_[i] + (1.0 - b2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
      p.mutable_value().array() -=
          lr * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + cfg_.adam_epsilon);
    }
  }

 private:
  std::vector<NamedParameter> params_;
  TrainConfig cfg_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  std::size_t steps_ = 0;
};

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0) throw ValidationError("train config: epochs must be positive");
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) {
    throw ValidationError("train config: learning_rate must be a non-negative finite number");
  }
  if (batch_size == 0) throw ValidationError("train config: batch_size must be positive");
  if (grad_clip_norm && !(*grad_clip_norm > 0)) {
    throw ValidationError("train config: grad_clip_norm must be positive or null");
  }
}

std::string RunHistory::to_csv() const {
  std::ostringstream os;
  os << "epoch,train_loss,val_bleu,seconds\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << shortest(e.train_loss) << ',' << (e.val_bleu ? shortest(*e.val_bleu) : "")
       << ',' << shortest(e.seconds) << '\n';
  }
  return os.str();
}

std::vector<Example> make_training_set(const Model& model, const std::vector<ImageRecord>& records,
                                       const Vocabulary& vocab, CaptionMode mode) {
  std::vector<Example> out;
  for (const auto& r : records) {
    const std::size_t n = mode == CaptionMode::first ? 1 : r.captions.size();
    for (std::size_t i = 0; i < n; ++i) out.push_back(make_example(model, r, vocab, i));
  }
  return out;
}

std::vector<EvalItem> make_eval_set(const Model& model, const std::vector<ImageRecord>& records,
                                    const Vocabulary& vocab) {
  std::vector<EvalItem> out;
  for (const auto& r : records) {
    EvalItem item{make_example(model, r, vocab, std::nullopt), {}};
    for (const auto& c : r.captions) item.references.push_back(tokenize(c));
    out.push_back(std::move(item));
  }
  return out;
}

double mean_loss(const Model& model, const std::vector<Example>& examples) {
  double total = 0;
  std::size_t tokens = 0;
  for (const auto& ex : examples) {
    Tape tape(false);
    total += caption_loss(tape, model, ex).item();
    tokens += ex.caption.size() - 1;
  }
  if (tokens == 0) throw std::invalid_argument("mean_loss: no tokens");
  return total / static_cast<double>(tokens);
}

RunHistory train(Model& model, const std::vector<Example>& train_set,
                 const std::vector<EvalItem>& val_set, const Vocabulary& vocab,
                 const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw ValidationError("training set is empty");

  Optimizer opt(model.parameters(), config);
  std::mt19937_64 rng(config.rng_seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  RunHistory history;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }

    double epoch_loss = 0;
    std::size_t epoch_tokens = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      opt.zero_grad();
      std::size_t batch_tokens = 0;
      for (std::size_t k = begin; k < end; ++k) {
        const Example& ex = train_set[order[k]];
        Tape tape;
        Tensor loss = caption_loss(tape, model, ex);
        backward(loss, tape);
        epoch_loss += loss.item();
        batch_tokens += ex.caption.size() - 1;
      }
      epoch_tokens += batch_tokens;
      opt.scale_grad(1.0 / static_cast<double>(batch_tokens));
      if (config.grad_clip_norm) opt.clip(*config.grad_clip_norm);
      opt.step();
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(epoch_tokens);
    if (!val_set.empty()) stats.val_bleu = evaluate(model, val_set, vocab, 4, 1).report.bleu;
    if (config.record_wall_time) {
      stats.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    history.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (config.target_loss && stats.train_loss < *config.target_loss) break;
  }
  return history;
}

TokenList render_tokens(const Vocabulary& vocab, const std::vector<std::size_t>& tokens) {
  TokenList out;
  out.reserve(tokens.size());
  for (auto t : tokens) out.push_back(vocab.token(t));
  return out;
}

EvaluationResult evaluate(const Model& model, const std::vector<EvalItem>& items,
                          const Vocabulary& vocab, std::size_t max_n, std::size_t threads) {
  if (items.empty()) throw ValidationError("evaluation set is empty");
  std::vector<TokenList> decoded(items.size());
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < items.size(); i += stride) {
      const Tensor enc = inference_encoding(model, items[i].example);
      decoded[i] = render_tokens(vocab, decode_greedy(model, enc).tokens);
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, items.size());
  if (threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::future<void>> jobs;
    for (std::size_t t = 0; t < threads; ++t) jobs.push_back(std::async(std::launch::async, work, t, threads));
    for (auto& j : jobs) j.get();
  }

  std::vector<std::size_t> by_id(items.size());
  std::iota(by_id.begin(), by_id.end(), std::size_t{0});
  std::stable_sort(by_id.begin(), by_id.end(), [&](std::size_t a, std::size_t b) {
    return items[a].example.id < items[b].example.id;
  });

  EvaluationResult result;
  result.max_n = max_n;
  std::vector<std::pair<TokenList, std::vector<TokenList>>> pairs;
  for (std::size_t i : by_id) {
    pairs.emplace_back(decoded[i], items[i].references);
    result.hypotheses.emplace_back(items[i].example.id, decoded[i]);
  }
  result.report = corpus_bleu_report(pairs, max_n, uniform_weights(max_n));
  return result;
}

}  // namespace objcap

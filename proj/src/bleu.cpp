#include "objcap/bleu.hpp"

#include <cmath>
#include <cstdlib>
#include <map>
#include <stdexcept>

namespace objcap {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const TokenList& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

void check_args(std::size_t max_n, const std::vector<double>& weights) {
  if (max_n == 0) throw std::invalid_argument("bleu: max_n must be >= 1");
  if (weights.size() != max_n) throw std::invalid_argument("bleu: need one weight per n-gram order");
  double total = 0;
  for (double w : weights) total += w;
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("bleu: weights must sum to 1");
}

std::size_t closest_ref_length(std::size_t hyp_len, const std::vector<TokenList>& refs) {
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto d = [&](std::size_t len) {
      return len > hyp_len ? len - hyp_len : hyp_len - len;
    };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
  }
  return best;
}

BleuReport accumulate(const std::vector<std::pair<TokenList, std::vector<TokenList>>>& pairs,
                      std::size_t max_n, const std::vector<double>& weights) {
  check_args(max_n, weights);
  BleuReport rep;
  rep.matches.assign(max_n, 0);
  rep.totals.assign(max_n, 0);
  for (const auto& [hyp, refs] : pairs) {
    if (refs.empty()) throw std::invalid_argument("bleu: every hypothesis needs a reference");
    rep.hypothesis_length += hyp.size();
    rep.reference_length += closest_ref_length(hyp.size(), refs);
    for (std::size_t n = 1; n <= max_n; ++n) {
      NgramCounts max_ref;
      for (const auto& r : refs) {
        for (const auto& [gram, c] : count_ngrams(r, n)) {
          auto& slot = max_ref[gram];
          if (c > slot) slot = c;
        }
      }
      for (const auto& [gram, c] : count_ngrams(hyp, n)) {
        rep.totals[n - 1] += c;
        auto it = max_ref.find(gram);
        if (it != max_ref.end()) rep.matches[n - 1] += std::min(c, it->second);
      }
    }
  }

  rep.precisions.assign(max_n, 0.0);
  double log_sum = 0;
  bool zero = rep.hypothesis_length == 0;
  for (std::size_t n = 0; n < max_n; ++n) {
    if (rep.totals[n] > 0) {
      rep.precisions[n] = static_cast<double>(rep.matches[n]) / static_cast<double>(rep.totals[n]);
    }
    if (rep.precisions[n] == 0.0) {
      zero = true;
    } else {
      log_sum += weights[n] * std::log(rep.precisions[n]);
    }
  }
  const double c = static_cast<double>(rep.hypothesis_length);
  const double r = static_cast<double>(rep.reference_length);
  rep.brevity_penalty = rep.hypothesis_length == 0 ? 0.0 : (c < r ? std::exp(1.0 - r / c) : 1.0);
  rep.bleu = zero ? 0.0 : rep.brevity_penalty * std::exp(log_sum);
  return rep;
}

}  // namespace

std::vector<double> uniform_weights(std::size_t max_n) {
  if (max_n == 0) throw std::invalid_argument("bleu: max_n must be >= 1");
  return std::vector<double>(max_n, 1.0 / static_cast<double>(max_n));
}

double sentence_bleu(const TokenList& hypothesis, const std::vector<TokenList>& references,
                     std::size_t max_n, const std::vector<double>& weights) {
  if (references.empty()) throw std::invalid_argument("bleu: references must be non-empty");
  return accumulate({{hypothesis, references}}, max_n, weights).bleu;
}

BleuReport corpus_bleu_report(const std::vector<std::pair<TokenList, std::vector<TokenList>>>& pairs,
                              std::size_t max_n, const std::vector<double>& weights) {
  if (pairs.empty()) throw std::invalid_argument("corpus_bleu: empty corpus");
  return accumulate(pairs, max_n, weights);
}

double corpus_bleu(const std::vector<std::pair<TokenList, std::vector<TokenList>>>& pairs,
                   std::size_t max_n, const std::vector<double>& weights) {
  return corpus_bleu_report(pairs, max_n, weights).bleu;
}

}  // namespace objcap

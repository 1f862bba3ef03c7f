#ifndef OBJCAP_BLEU_HPP
#define OBJCAP_BLEU_HPP

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace objcap {

using TokenList = std::vector<std::string>;

/// Corpus-level BLEU breakdown. precisions[n-1] is the clipped n-gram
/// precision; matches/totals hold the summed clipped and total counts.
struct BleuReport {
  double bleu = 0;
  std::vector<double> precisions;
  std::vector<std::size_t> matches;
  std::vector<std::size_t> totals;
  double brevity_penalty = 0;
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;
};

/// Uniform weights 1/max_n.
std::vector<double> uniform_weights(std::size_t max_n);

/// BLEU of one hypothesis against its references. No smoothing: any zero
/// precision gives 0. Brevity uses the reference length closest to the
/// hypothesis length, preferring the shorter on ties.
double sentence_bleu(const TokenList& hypothesis, const std::vector<TokenList>& references,
                     std::size_t max_n, const std::vector<double>& weights);

/// Counts and lengths are summed over every pair before precisions and the
/// brevity penalty are computed.
BleuReport corpus_bleu_report(const std::vector<std::pair<TokenList, std::vector<TokenList>>>& pairs,
                              std::size_t max_n, const std::vector<double>& weights);

double corpus_bleu(const std::vector<std::pair<TokenList, std::vector<TokenList>>>& pairs,
                   std::size_t max_n, const std::vector<double>& weights);

}  // namespace objcap

#endif  // OBJCAP_BLEU_HPP

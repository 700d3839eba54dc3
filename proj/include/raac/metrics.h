#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace raac {

struct EvalPair {
  std::vector<std::string> candidate;
  std::vector<std::vector<std::string>> references;  // 1..R token lists
};

// Tokenizes with the shared tokenizer so every metric sees identical tokens.
EvalPair make_eval_pair(const std::string& candidate, const std::vector<std::string>& references);

// Corpus-level BLEU-n: clipped modified n-gram precisions, geometric mean,
// closest-reference brevity penalty, no smoothing.
double bleu(const std::vector<EvalPair>& pairs, int n);

// Mean over pairs of the best-reference LCS F-measure (beta = 1.2).
double rouge_l(const std::vector<EvalPair>& pairs);

// tf-idf n-gram consensus (n = 1..4) with clipping and a Gaussian length
// penalty (sigma = 6), averaged over n and references, scaled by 10. The
// idf is defined over this corpus's references, so at least 2 pairs are
// required.
double cider_d(const std::vector<EvalPair>& pairs);

struct MetricReport {
  double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
  double rouge_l = 0;
  double cider_d = 0;
  std::size_t pair_count = 0;
};

MetricReport evaluate_corpus(const std::vector<EvalPair>& pairs);

// "metric,value" rows with 4 decimal places.
std::string report_csv(const MetricReport& report);
std::string report_table(const MetricReport& report);

}  // namespace raac

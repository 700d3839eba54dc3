#include "raac/metrics.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <unordered_set>

#include "raac/errors.h"
#include "raac/text.h"

namespace raac {

namespace {

constexpr int kMaxOrder = 4;

using Counts = std::unordered_map<std::string, double>;

// N-grams keyed as "<order>\x1f<w1>\x1f<w2>...". One map covers all orders.
std::string ngram_key(int order, const std::vector<std::string>& tokens, std::size_t start) {
  std::string key(1, static_cast<char>('0' + order));
  for (int j = 0; j < order; ++j) {
    key.push_back('\x1f');
    key += tokens[start + static_cast<std::size_t>(j)];
  }
  return key;
}

Counts ngram_counts(const std::vector<std::string>& tokens, int order) {
  Counts counts;
  if (tokens.size() < static_cast<std::size_t>(order)) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(order) <= tokens.size(); ++i) {
    counts[ngram_key(order, tokens, i)] += 1.0;
  }
  return counts;
}

Counts ngram_counts_all_orders(const std::vector<std::string>& tokens) {
  Counts counts;
  for (int order = 1; order <= kMaxOrder; ++order) {
    for (std::size_t i = 0; tokens.size() >= static_cast<std::size_t>(order) &&
                            i + static_cast<std::size_t>(order) <= tokens.size();
         ++i) {
      counts[ngram_key(order, tokens, i)] += 1.0;
    }
  }
  return counts;
}

void validate_pairs(const std::vector<EvalPair>& pairs) {
  if (pairs.empty()) throw InvalidArgument("metrics: empty pair list");
  for (const EvalPair& pair : pairs) {
    if (pair.references.empty()) throw InvalidArgument("metrics: pair without references");
  }
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0 || m == 0) return 0;
  std::vector<std::size_t> prev(m + 1, 0), cur(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace

EvalPair make_eval_pair(const std::string& candidate, const std::vector<std::string>& references) {
  EvalPair pair;
  pair.candidate = tokenize(candidate);
  pair.references.reserve(references.size());
  for (const std::string& r : references) pair.references.push_back(tokenize(r));
  return pair;
}

double bleu(const std::vector<EvalPair>& pairs, int n) {
  validate_pairs(pairs);
  if (n < 1 || n > kMaxOrder) throw InvalidArgument("bleu order must be in 1..4");

  std::vector<std::int64_t> clipped(static_cast<std::size_t>(n), 0);
  std::vector<std::int64_t> total(static_cast<std::size_t>(n), 0);
  std::int64_t candidate_len = 0;
  std::int64_t reference_len = 0;

  for (const EvalPair& pair : pairs) {
    const std::int64_t c = static_cast<std::int64_t>(pair.candidate.size());
    candidate_len += c;
    // Closest reference length; ties favor the shorter reference.
    std::int64_t best_r = static_cast<std::int64_t>(pair.references[0].size());
    for (const auto& ref : pair.references) {
      const std::int64_t r = static_cast<std::int64_t>(ref.size());
      const std::int64_t diff = std::llabs(r - c), best_diff = std::llabs(best_r - c);
      if (diff < best_diff || (diff == best_diff && r < best_r)) best_r = r;
    }
    reference_len += best_r;

    for (int order = 1; order <= n; ++order) {
      const Counts cand = ngram_counts(pair.candidate, order);
      Counts max_ref;
      for (const auto& ref : pair.references) {
        for (const auto& [key, count] : ngram_counts(ref, order)) {
          double& slot = max_ref[key];
          slot = std::max(slot, count);
        }
      }
      double clip = 0, tot = 0;
      for (const auto& [key, count] : cand) {
        tot += count;
        const auto it = max_ref.find(key);
        if (it != max_ref.end()) clip += std::min(count, it->second);
      }
      clipped[static_cast<std::size_t>(order - 1)] += static_cast<std::int64_t>(clip);
      total[static_cast<std::size_t>(order - 1)] += static_cast<std::int64_t>(tot);
    }
  }

  if (candidate_len == 0) return 0.0;
  double log_precision_sum = 0.0;
  for (int order = 0; order < n; ++order) {
    const auto i = static_cast<std::size_t>(order);
    if (total[i] == 0 || clipped[i] == 0) return 0.0;
    log_precision_sum += std::log(static_cast<double>(clipped[i]) / static_cast<double>(total[i]));
  }
  double brevity = 1.0;
  if (candidate_len < reference_len) {
    brevity = std::exp(1.0 - static_cast<double>(reference_len) / static_cast<double>(candidate_len));
  }
  return brevity * std::exp(log_precision_sum / n);
}

double rouge_l(const std::vector<EvalPair>& pairs) {
  validate_pairs(pairs);
  constexpr double beta = 1.2;
  double sum = 0.0;
  for (const EvalPair& pair : pairs) {
    double best = 0.0;
    for (const auto& ref : pair.references) {
      const auto lcs = static_cast<double>(lcs_length(pair.candidate, ref));
      if (lcs == 0.0 || pair.candidate.empty() || ref.empty()) continue;
      const double precision = lcs / static_cast<double>(pair.candidate.size());
      const double recall = lcs / static_cast<double>(ref.size());
      const double denom = recall + beta * beta * precision;
      if (denom == 0.0) continue;
      best = std::max(best, (1.0 + beta * beta) * recall * precision / denom);
    }
    sum += best;
  }
  return sum / static_cast<double>(pairs.size());
}

double cider_d(const std::vector<EvalPair>& pairs) {
  validate_pairs(pairs);
  if (pairs.size() < 2) {
    throw InvalidArgument("cider_d: idf undefined for corpora with fewer than 2 pairs");
  }
  constexpr double sigma = 6.0;

  // Document frequency: the number of pairs whose reference set contains
  // the n-gram at least once.
  Counts document_frequency;
  for (const EvalPair& pair : pairs) {
    std::unordered_set<std::string> seen;
    for (const auto& ref : pair.references) {
      for (const auto& [key, count] : ngram_counts_all_orders(ref)) {
        (void)count;
        seen.insert(key);
      }
    }
    for (const std::string& key : seen) document_frequency[key] += 1.0;
  }
  const double log_corpus = std::log(static_cast<double>(pairs.size()));

  struct TfIdf {
    std::array<Counts, kMaxOrder> vec;
    std::array<double, kMaxOrder> norm{};
    double length = 0;
  };
  auto to_tfidf = [&](const std::vector<std::string>& tokens) {
    TfIdf out;
    out.length = static_cast<double>(tokens.size());
    for (const auto& [key, count] : ngram_counts_all_orders(tokens)) {
      const int order_index = key[0] - '1';
      const auto df_it = document_frequency.find(key);
      const double df = df_it == document_frequency.end() ? 0.0 : df_it->second;
      const double idf = log_corpus - std::log(std::max(1.0, df));
      const double w = count * idf;
      out.vec[static_cast<std::size_t>(order_index)][key] = w;
      out.norm[static_cast<std::size_t>(order_index)] += w * w;
    }
    for (double& v : out.norm) v = std::sqrt(v);
    return out;
  };

  double corpus_sum = 0.0;
  for (const EvalPair& pair : pairs) {
    const TfIdf cand = to_tfidf(pair.candidate);
    double pair_sum = 0.0;
    for (const auto& ref : pair.references) {
      const TfIdf rv = to_tfidf(ref);
      const double delta = cand.length - rv.length;
      const double length_penalty = std::exp(-(delta * delta) / (2.0 * sigma * sigma));
      for (int order = 0; order < kMaxOrder; ++order) {
        const auto i = static_cast<std::size_t>(order);
        if (cand.norm[i] == 0.0 || rv.norm[i] == 0.0) continue;
        double accum = 0.0;
        for (const auto& [key, cw] : cand.vec[i]) {
          const auto it = rv.vec[i].find(key);
          if (it == rv.vec[i].end()) continue;
          accum += std::min(cw, it->second) * it->second;
        }
        pair_sum += length_penalty * accum / (cand.norm[i] * rv.norm[i]);
      }
    }
    corpus_sum +=
        10.0 * pair_sum / (kMaxOrder * static_cast<double>(pair.references.size()));
  }
  return corpus_sum / static_cast<double>(pairs.size());
}

MetricReport evaluate_corpus(const std::vector<EvalPair>& pairs) {
  validate_pairs(pairs);
  if (pairs.size() < 2) throw InvalidArgument("evaluate_corpus: need at least 2 pairs");
  MetricReport report;
  report.bleu1 = bleu(pairs, 1);
  report.bleu2 = bleu(pairs, 2);
  report.bleu3 = bleu(pairs, 3);
  report.bleu4 = bleu(pairs, 4);
  report.rouge_l = rouge_l(pairs);
  report.cider_d = cider_d(pairs);
  report.pair_count = pairs.size();
  return report;
}

std::string report_csv(const MetricReport& report) {
  std::string out = "metric,value\n";
  out += "bleu1," + format_fixed(report.bleu1, 4) + "\n";
  out += "bleu2," + format_fixed(report.bleu2, 4) + "\n";
  out += "bleu3," + format_fixed(report.bleu3, 4) + "\n";
  out += "bleu4," + format_fixed(report.bleu4, 4) + "\n";
  out += "rouge_l," + format_fixed(report.rouge_l, 4) + "\n";
  out += "cider_d," + format_fixed(report.cider_d, 4) + "\n";
  out += "pair_count," + format_fixed(static_cast<double>(report.pair_count), 4) + "\n";
  return out;
}

std::string report_table(const MetricReport& report) {
  std::string out;
  out += "  metric     value\n";
  out += "  bleu1      " + format_fixed(report.bleu1, 4) + "\n";
  out += "  bleu2      " + format_fixed(report.bleu2, 4) + "\n";
  out += "  bleu3      " + format_fixed(report.bleu3, 4) + "\n";
  out += "  bleu4      " + format_fixed(report.bleu4, 4) + "\n";
  out += "  rouge_l    " + format_fixed(report.rouge_l, 4) + "\n";
  out += "  cider_d    " + format_fixed(report.cider_d, 4) + "\n";
  out += "  pairs      " + std::to_string(report.pair_count) + "\n";
  return out;
}

}  // namespace raac

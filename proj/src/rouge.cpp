#include "hibert/rouge.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace hibert {

namespace {

RougeScore make_score(double overlap, double cand_total, double ref_total) {
  RougeScore s;
  if (cand_total > 0.0) s.precision = overlap / cand_total;
  if (ref_total > 0.0) s.recall = overlap / ref_total;
  if (s.precision + s.recall > 0.0)
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

std::map<std::vector<int>, long> ngram_counts(const TokenSeq& tokens, int n) {
  std::map<std::vector<int>, long> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i)
    counts[std::vector<int>(tokens.begin() + static_cast<long>(i),
                            tokens.begin() + static_cast<long>(i) + n)] += 1;
  return counts;
}

}  // namespace

RougeScore rouge_n(const TokenSeq& candidate, const TokenSeq& reference, int n) {
  if (n != 1 && n != 2) throw std::invalid_argument("rouge_n: n must be 1 or 2");
  auto cand = ngram_counts(candidate, n);
  auto ref = ngram_counts(reference, n);
  long overlap = 0, cand_total = 0, ref_total = 0;
  for (const auto& [g, c] : cand) cand_total += c;
  for (const auto& [g, c] : ref) ref_total += c;
  for (const auto& [g, c] : cand) {
    auto it = ref.find(g);
    if (it != ref.end()) overlap += std::min(c, it->second);
  }
  return make_score(static_cast<double>(overlap), static_cast<double>(cand_total),
                    static_cast<double>(ref_total));
}

RougeScore rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
  size_t m = candidate.size(), n = reference.size();
  if (m == 0 || n == 0) return RougeScore{};
  // Two-row LCS dynamic program.
  std::vector<long> prev(n + 1, 0), cur(n + 1, 0);
  for (size_t i = 1; i <= m; ++i) {
    for (size_t j = 1; j <= n; ++j) {
      if (candidate[i - 1] == reference[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  long lcs = prev[n];
  return make_score(static_cast<double>(lcs), static_cast<double>(m),
                    static_cast<double>(n));
}

double oracle_objective(const TokenSeq& selection, const TokenSeq& reference) {
  return 0.5 * (rouge_n(selection, reference, 1).f1 + rouge_n(selection, reference, 2).f1);
}

double selection_score(const std::vector<TokenSeq>& sentences, const std::vector<bool>& labels,
                       const TokenSeq& reference) {
  TokenSeq concat;
  for (size_t i = 0; i < sentences.size(); ++i)
    if (i < labels.size() && labels[i])
      concat.insert(concat.end(), sentences[i].begin(), sentences[i].end());
  return oracle_objective(concat, reference);
}

std::vector<bool> oracle_labels_greedy(const std::vector<TokenSeq>& sentences,
                                       const TokenSeq& reference, int max_selected) {
  if (reference.empty()) throw std::invalid_argument("oracle_labels_greedy: empty reference");
  std::vector<bool> labels(sentences.size(), false);
  TokenSeq current;
  double best_score = 0.0;
  int selected = 0;
  while (selected < max_selected) {
    long best_i = -1;
    double best_gain_score = best_score;
    for (size_t i = 0; i < sentences.size(); ++i) {
      if (labels[i]) continue;
      // Candidate keeps document order.
      TokenSeq trial;
      for (size_t j = 0; j < sentences.size(); ++j)
        if (labels[j] || j == i)
          trial.insert(trial.end(), sentences[j].begin(), sentences[j].end());
      double s = oracle_objective(trial, reference);
      if (s > best_gain_score) {
        best_gain_score = s;
        best_i = static_cast<long>(i);
      }
    }
    if (best_i < 0) break;
    labels[static_cast<size_t>(best_i)] = true;
    best_score = best_gain_score;
    ++selected;
  }
  return labels;
}

std::vector<bool> oracle_labels_exhaustive(const std::vector<TokenSeq>& sentences,
                                           const TokenSeq& reference, int max_selected) {
  size_t n = sentences.size();
  if (n > 12)
    throw std::invalid_argument(
        "oracle_labels_exhaustive: more than 12 sentences; use oracle_labels_greedy");
  std::vector<bool> best(n, false);
  double best_score = 0.0;  // empty selection scores 0

  // Depth-first enumeration visits index sets in lexicographic order, so the
  // first subset reaching a score is the lexicographically smallest.
  std::vector<bool> labels(n, false);
  auto dfs = [&](auto&& self, size_t start, int used) -> void {
    if (used > 0) {
      double s = selection_score(sentences, labels, reference);
      if (s > best_score) {
        best_score = s;
        best = labels;
      }
    }
    if (used == max_selected) return;
    for (size_t i = start; i < n; ++i) {
      labels[i] = true;
      self(self, i + 1, used + 1);
      labels[i] = false;
    }
  };
  dfs(dfs, 0, 0);
  return best;
}

}  // namespace hibert

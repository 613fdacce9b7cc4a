#pragma once

#include <vector>

namespace hibert {

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

using TokenSeq = std::vector<int>;

/// Clipped n-gram overlap precision/recall/F1, n in {1, 2}.
RougeScore rouge_n(const TokenSeq& candidate, const TokenSeq& reference, int n);

/// Longest-common-subsequence precision/recall/F1.
RougeScore rouge_l(const TokenSeq& candidate, const TokenSeq& reference);

/// Selection objective used for oracle labels: mean of ROUGE-1 and ROUGE-2 F1
/// of the concatenated selection against the reference.
double oracle_objective(const TokenSeq& selection, const TokenSeq& reference);

/// Greedy forward selection of the sentence subset maximizing the objective.
/// Stops when no sentence improves the score or max_selected is reached.
std::vector<bool> oracle_labels_greedy(const std::vector<TokenSeq>& sentences,
                                       const TokenSeq& reference, int max_selected);

/// Exact argmax over all subsets of size <= max_selected (up to 12 sentences);
/// ties go to the lexicographically smallest index set.
std::vector<bool> oracle_labels_exhaustive(const std::vector<TokenSeq>& sentences,
                                           const TokenSeq& reference, int max_selected);

/// Objective value of a boolean selection (concatenated in document order).
double selection_score(const std::vector<TokenSeq>& sentences, const std::vector<bool>& labels,
                       const TokenSeq& reference);

}  // namespace hibert

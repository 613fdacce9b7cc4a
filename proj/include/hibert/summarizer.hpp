#pragma once

#include <string>
#include <vector>

#include "hibert/encoder.hpp"
#include "hibert/pretrain.hpp"
#include "hibert/rouge.hpp"

namespace hibert {

struct LabeledDocument {
  std::string id;
  Document doc;
  std::vector<bool> labels;                 // |labels| == |doc.sentences|
  std::vector<std::vector<int>> reference;  // reference summary sentences (ids)
};

/// Ranked sentence indices with their True-class probabilities and the chosen
/// top-K subset, emitted in original document order.
struct SummarySelection {
  std::vector<long> ranked;       // by probability descending, position tie-break
  std::vector<Scalar> probs;      // per sentence, document order
  std::vector<long> chosen;       // ascending document order, size <= K
};

/// Per-sentence probability of the True label (two-logit softmax head).
std::vector<Scalar> classify_sentences(const Document& doc, const ModelParams& params,
                                       const RunContext& ctx);

/// Sentence-label cross-entropy of one labeled document.
Tensor finetune_loss(const LabeledDocument& doc, const ModelParams& params,
                     const RunContext& ctx);

SummarySelection rank_and_select(const std::vector<Scalar>& probs, int k);

struct FinetuneOptions {
  Schedule schedule{5e-5, 4000};
  AdamConfig adam{};
  int batch_size = 32;
  long epochs = 5;
  Scalar dropout = 0.1;
  uint64_t seed = 0;
};

struct FinetuneResult {
  std::vector<TrainLogEntry> log;  // val_ppl field carries validation NLL here
  long final_step = 0;
};

/// Full-model fine-tuning on sentence labels; deterministic given the seed.
FinetuneResult finetune(ModelParams& params, AdamState& adam,
                        const std::vector<LabeledDocument>& train,
                        const std::vector<LabeledDocument>& valid,
                        const FinetuneOptions& options);

/// Mean label NLL over a labeled corpus (eval mode).
Scalar label_nll(const std::vector<LabeledDocument>& docs, const ModelParams& params);

/// Fraction of sentences whose predicted label (p > 0.5) matches.
Scalar label_accuracy(const std::vector<LabeledDocument>& docs, const ModelParams& params);

/// Mean of ROUGE-1/2/L F1 of top-K summaries over a labeled corpus.
Scalar mean_rouge_at_k(const std::vector<LabeledDocument>& docs, const ModelParams& params,
                       int k);

/// Pick K from k_range maximizing mean ROUGE on the validation corpus;
/// ties go to the smaller K.
int tune_k(const ModelParams& params, const std::vector<LabeledDocument>& validation,
           const std::vector<int>& k_range);

}  // namespace hibert

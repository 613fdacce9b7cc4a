#include "hibert/summarizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hibert {

namespace {

Tensor label_logits(const Document& doc, const ModelParams& params, const RunContext& ctx) {
  SentenceRepr repr = encode_document(doc, params, ctx);
  return add(matmul(repr.d, params.cls_w), params.cls_b);  // [n, 2]
}

TokenSeq concat_reference(const LabeledDocument& doc) {
  TokenSeq ref;
  for (const auto& s : doc.reference)
    for (int id : s)
      if (id != Vocab::kEos) ref.push_back(id);
  return ref;
}

TokenSeq summary_tokens(const LabeledDocument& doc, const std::vector<long>& chosen) {
  TokenSeq out;
  for (long i : chosen)
    for (int id : doc.doc.sentences[static_cast<size_t>(i)])
      if (id != Vocab::kEos) out.push_back(id);
  return out;
}

}  // namespace

std::vector<Scalar> classify_sentences(const Document& doc, const ModelParams& params,
                                       const RunContext& ctx) {
  Tensor probs = softmax(label_logits(doc, params, ctx), 1);
  std::vector<Scalar> out;
  for (Index i = 0; i < probs.dim(0); ++i) out.push_back(probs.at(i, 1));
  return out;
}

Tensor finetune_loss(const LabeledDocument& doc, const ModelParams& params,
                     const RunContext& ctx) {
  if (doc.labels.size() != doc.doc.sentences.size())
    throw std::invalid_argument("finetune_loss: " + std::to_string(doc.doc.sentences.size()) +
                                " sentences but " + std::to_string(doc.labels.size()) +
                                " labels");
  std::vector<int> targets;
  for (bool y : doc.labels) targets.push_back(y ? 1 : 0);
  return nll_loss(label_logits(doc.doc, params, ctx), targets,
                  std::vector<bool>(targets.size(), true));
}

SummarySelection rank_and_select(const std::vector<Scalar>& probs, int k) {
  if (probs.empty()) throw std::invalid_argument("rank_and_select: no probabilities");
  if (k < 1) throw std::invalid_argument("rank_and_select: K must be >= 1");
  SummarySelection sel;
  sel.probs = probs;
  sel.ranked.resize(probs.size());
  std::iota(sel.ranked.begin(), sel.ranked.end(), 0);
  // Stable sort keeps earlier sentences first on equal probability.
  std::stable_sort(sel.ranked.begin(), sel.ranked.end(), [&](long a, long b) {
    return probs[static_cast<size_t>(a)] > probs[static_cast<size_t>(b)];
  });
  size_t take = std::min<size_t>(static_cast<size_t>(k), probs.size());
  sel.chosen.assign(sel.ranked.begin(), sel.ranked.begin() + static_cast<long>(take));
  std::sort(sel.chosen.begin(), sel.chosen.end());
  return sel;
}

FinetuneResult finetune(ModelParams& params, AdamState& adam,
                        const std::vector<LabeledDocument>& train,
                        const std::vector<LabeledDocument>& valid,
                        const FinetuneOptions& options) {
  for (const auto& d : train)
    if (d.labels.size() != d.doc.sentences.size())
      throw std::invalid_argument("finetune: label/sentence count mismatch in " + d.id);

  FinetuneResult result;
  ParamMap named = params.named();
  long step = 0;
  for (long epoch = 0; epoch < options.epochs; ++epoch) {
    Rng epoch_rng(Rng::mix(options.seed, 0xf1u + static_cast<uint64_t>(epoch)));
    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<size_t>(epoch_rng.below(i))]);

    for (size_t lo = 0; lo < order.size(); lo += static_cast<size_t>(options.batch_size)) {
      size_t hi = std::min(order.size(), lo + static_cast<size_t>(options.batch_size));
      Rng step_rng(Rng::mix(options.seed, 0xf2000u + static_cast<uint64_t>(step + 1)));
      RunContext ctx{true, options.dropout, &step_rng};
      named.zero_grad();
      Scalar batch_loss = 0.0;
      for (size_t i = lo; i < hi; ++i) {
        Tensor loss = scale(finetune_loss(train[order[i]], params, ctx),
                            1.0 / static_cast<Scalar>(hi - lo));
        backward(loss);
        batch_loss += loss.item();
      }
      adam_step(named, adam, options.schedule, options.adam);
      step += 1;
      result.log.push_back({step, "finetune", lr_at(options.schedule, adam.step), batch_loss, -1.0});
    }
    if (!valid.empty()) {
      Scalar nll = label_nll(valid, params);
      result.log.push_back({step, "finetune",
                            lr_at(options.schedule, std::max(1L, adam.step)),
                            result.log.empty() ? 0.0 : result.log.back().train_loss, nll});
    }
  }
  result.final_step = step;
  return result;
}

Scalar label_nll(const std::vector<LabeledDocument>& docs, const ModelParams& params) {
  RunContext ctx;
  Scalar total = 0.0;
  long count = 0;
  for (const auto& d : docs) {
    Tensor loss = finetune_loss(d, params, ctx);
    total += loss.item() * static_cast<Scalar>(d.labels.size());
    count += static_cast<long>(d.labels.size());
  }
  return count == 0 ? 0.0 : total / static_cast<Scalar>(count);
}

Scalar label_accuracy(const std::vector<LabeledDocument>& docs, const ModelParams& params) {
  RunContext ctx;
  long correct = 0, count = 0;
  for (const auto& d : docs) {
    std::vector<Scalar> probs = classify_sentences(d.doc, params, ctx);
    for (size_t i = 0; i < probs.size(); ++i) {
      bool pred = probs[i] > 0.5;
      correct += pred == d.labels[i] ? 1 : 0;
      count += 1;
    }
  }
  return count == 0 ? 0.0 : static_cast<Scalar>(correct) / static_cast<Scalar>(count);
}

Scalar mean_rouge_at_k(const std::vector<LabeledDocument>& docs, const ModelParams& params,
                       int k) {
  RunContext ctx;
  Scalar total = 0.0;
  for (const auto& d : docs) {
    SummarySelection sel = rank_and_select(classify_sentences(d.doc, params, ctx), k);
    TokenSeq cand = summary_tokens(d, sel.chosen);
    TokenSeq ref = concat_reference(d);
    total += (rouge_n(cand, ref, 1).f1 + rouge_n(cand, ref, 2).f1 + rouge_l(cand, ref).f1) / 3.0;
  }
  return docs.empty() ? 0.0 : total / static_cast<Scalar>(docs.size());
}

int tune_k(const ModelParams& params, const std::vector<LabeledDocument>& validation,
           const std::vector<int>& k_range) {
  if (k_range.empty()) throw std::invalid_argument("tune_k: empty range");
  int best_k = k_range.front();
  Scalar best_score = -1.0;
  for (int k : k_range) {
    Scalar s = mean_rouge_at_k(validation, params, k);
    if (s > best_score || (s == best_score && k < best_k)) {
      best_score = s;
      best_k = k;
    }
  }
  return best_k;
}

}  // namespace hibert

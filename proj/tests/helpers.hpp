#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "hibert/corpus.hpp"
#include "hibert/encoder.hpp"
#include "hibert/pretrain.hpp"
#include "hibert/summarizer.hpp"

namespace testutil {

using namespace hibert;

// Analytic gradient vs central finite differences over every element of
// `inputs`. `f` rebuilds the scalar loss graph from the tensors' current data.
inline double fd_max_rel_err(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                             double h = 1e-5) {
  for (auto& t : inputs) t.zero_grad();
  backward(f());
  double worst = 0.0;
  for (auto& t : inputs) {
    for (Index i = 0; i < t.size(); ++i) {
      double keep = t.at(i);
      t.mut(i) = keep + h;
      double up = f().item();
      t.mut(i) = keep - h;
      double down = f().item();
      t.mut(i) = keep;
      double num = (up - down) / (2.0 * h);
      double ana = t.has_grad() ? t.grad()[i] : 0.0;
      double scale = std::max(std::abs(num), std::abs(ana));
      double err = scale < 1e-6 ? std::abs(num - ana) : std::abs(num - ana) / scale;
      worst = std::max(worst, err);
    }
  }
  return worst;
}

inline Tensor rand_tensor(Shape shape, Rng& rng, bool requires_grad = true) {
  Tensor t = Tensor::zeros(shape, requires_grad);
  for (Index i = 0; i < t.size(); ++i) t.mut(i) = rng.uniform(-1.0, 1.0);
  return t;
}

// A document of random token ids over vocab [5, vocab_size), EOS-terminated.
inline Document random_document(Rng& rng, int vocab_size, int min_sents = 2, int max_sents = 4,
                                int min_toks = 2, int max_toks = 5) {
  Document doc;
  int n = min_sents + static_cast<int>(rng.below(static_cast<uint64_t>(max_sents - min_sents + 1)));
  for (int s = 0; s < n; ++s) {
    int m = min_toks + static_cast<int>(rng.below(static_cast<uint64_t>(max_toks - min_toks + 1)));
    std::vector<int> sent;
    for (int t = 0; t < m; ++t)
      sent.push_back(5 + static_cast<int>(rng.below(static_cast<uint64_t>(vocab_size - 5))));
    sent.push_back(Vocab::kEos);
    doc.sentences.push_back(std::move(sent));
  }
  return doc;
}

// Synthetic corpus for memorization runs: every document is drawn from a tiny
// fixed sentence inventory, so a small model can learn it quickly.
inline std::vector<Document> memorization_corpus(int docs, int vocab_size, uint64_t seed) {
  std::vector<std::vector<int>> inventory;
  Rng rng(seed);
  for (int s = 0; s < 8; ++s) {
    std::vector<int> sent;
    int m = 3 + static_cast<int>(rng.below(3));
    for (int t = 0; t < m; ++t)
      sent.push_back(5 + static_cast<int>(rng.below(static_cast<uint64_t>(vocab_size - 5))));
    sent.push_back(Vocab::kEos);
    inventory.push_back(std::move(sent));
  }
  std::vector<Document> corpus;
  for (int d = 0; d < docs; ++d) {
    Document doc;
    for (int s = 0; s < 4; ++s)
      doc.sentences.push_back(inventory[rng.below(inventory.size())]);
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

// Planted-keyword labeling task: a sentence is True iff it contains `keyword`.
inline std::vector<LabeledDocument> keyword_corpus(int docs, int vocab_size, int keyword,
                                                   uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledDocument> out;
  for (int d = 0; d < docs; ++d) {
    LabeledDocument ld;
    ld.id = "doc-" + std::to_string(d);
    int n = 4;
    for (int s = 0; s < n; ++s) {
      std::vector<int> sent;
      int m = 3 + static_cast<int>(rng.below(3));
      for (int t = 0; t < m; ++t) {
        int id = 5 + static_cast<int>(rng.below(static_cast<uint64_t>(vocab_size - 5)));
        if (id == keyword) id = keyword == 5 ? 6 : 5;  // keep fillers keyword-free
        sent.push_back(id);
      }
      bool positive = rng.uniform() < 0.5;
      if (positive) sent[rng.below(sent.size())] = keyword;
      sent.push_back(Vocab::kEos);
      ld.doc.sentences.push_back(std::move(sent));
      ld.labels.push_back(positive);
    }
    out.push_back(std::move(ld));
  }
  return out;
}

inline ModelConfig small_config(int vocab_size) {
  ModelConfig c;
  c.layers = 2;
  c.hidden = 16;
  c.heads = 4;
  c.ff = 64;
  c.dropout = 0.0;
  c.vocab_size = vocab_size;
  return c;
}

inline void zero_stack(StackParams& stack) {
  for (auto& l : stack.layers)
    for (Tensor* t : {&l.attn.wq, &l.attn.bq, &l.attn.wk, &l.attn.bk, &l.attn.wv, &l.attn.bv,
                      &l.attn.wo, &l.attn.bo, &l.ff_w1, &l.ff_b1, &l.ff_w2, &l.ff_b2})
      t->data().setZero();
}

}  // namespace testutil

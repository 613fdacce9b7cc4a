#pragma once

#include <string>
#include <vector>

#include "hibert/optim.hpp"
#include "hibert/tensor.hpp"
#include "hibert/textpipe.hpp"

namespace hibert {

struct ModelConfig {
  int layers = 2;
  int hidden = 64;
  int heads = 4;
  int ff = 256;  // always 4 * hidden
  Scalar dropout = 0.1;
  int vocab_size = 0;

  void validate() const;

  static ModelConfig tiny(int vocab_size);      // L=2, H=64,  A=4
  static ModelConfig hibert_s(int vocab_size);  // L=6, H=512, A=8
  static ModelConfig hibert_m(int vocab_size);  // L=6, H=768, A=12
};

struct AttnParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct LayerParams {
  Tensor ln1_gain, ln1_bias;
  AttnParams attn;
  Tensor ln2_gain, ln2_bias;
  Tensor ff_w1, ff_b1, ff_w2, ff_b2;
};

struct StackParams {
  std::vector<LayerParams> layers;
};

/// All trainable tensors: embedding table, sentence/document encoder stacks,
/// decoder stack, output projection and the sentence classifier head.
/// Positional vectors are computed (sine-cosine), never stored.
struct ModelParams {
  ModelConfig config;
  Tensor word_embed;              // [V, H]
  StackParams sent_enc, doc_enc, decoder;
  Tensor out_proj_w, out_proj_b;  // [H, V], [V]
  Tensor cls_w, cls_b;            // [H, 2], [2]

  static ModelParams init(const ModelConfig& config, Rng& rng);

  /// Named view over the underlying tensors, fixed canonical order.
  ParamMap named() const;
};

/// Forward-pass mode switches: dropout is active only when training.
struct RunContext {
  bool training = false;
  Scalar dropout = 0.0;
  Rng* rng = nullptr;
};

/// Sine-cosine position vector: entry 2i = sin(pos/10000^{2i/d}),
/// entry 2i+1 = cos(pos/10000^{2i/d}). Shared by word and sentence positions.
Tensor sincos_position(long pos, int d);
Tensor sincos_rows(long start, long count, int d);  // [count, d]

/// Additive attention masks (0 keeps, large negative hides).
Tensor causal_mask(Index n);
Tensor key_pad_mask(const std::vector<bool>& pad, Index query_rows);

/// Scaled dot-product multi-head attention over rank-2 inputs [n, H].
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttnParams& params, int heads, const Tensor& mask,
                            const RunContext& ctx);

/// Pre-norm transformer layer: x + drop(attn(LN(x))), then + drop(ffn(LN(.))).
Tensor encoder_layer(const Tensor& x, const std::vector<bool>& pad_mask,
                     const LayerParams& params, int heads, const RunContext& ctx);

/// Run a full encoder stack (empty pad_mask = nothing padded).
Tensor run_stack(const Tensor& x, const std::vector<bool>& pad_mask, const StackParams& stack,
                 int heads, const RunContext& ctx);

/// Sentence vector: encode tokens (must end with EOS), take the hidden state
/// at EOS, add the sentence-position vector. Returns [H].
Tensor encode_sentence(const std::vector<int>& ids, long sentence_index,
                       const ModelParams& params, const RunContext& ctx);

struct SentenceRepr {
  Tensor h_hat;  // [n, H] position-augmented sentence vectors
  Tensor d;      // [n, H] context-sensitive representations
};

SentenceRepr encode_document(const Document& doc, const ModelParams& params,
                             const RunContext& ctx);

}  // namespace hibert

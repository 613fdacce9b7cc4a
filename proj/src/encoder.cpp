#include "hibert/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace hibert {

namespace {
constexpr Scalar kMaskValue = -1e30;
}

void ModelConfig::validate() const {
  if (layers < 1) throw std::invalid_argument("ModelConfig: layers must be >= 1");
  if (hidden < 1 || heads < 1 || hidden % heads != 0)
    throw std::invalid_argument("ModelConfig: hidden must be a positive multiple of heads");
  if (ff != 4 * hidden) throw std::invalid_argument("ModelConfig: ff must equal 4 * hidden");
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::invalid_argument("ModelConfig: dropout must be in [0, 1)");
  if (vocab_size < 5) throw std::invalid_argument("ModelConfig: vocab_size must cover reserved ids");
}

ModelConfig ModelConfig::tiny(int vocab_size) {
  return ModelConfig{2, 64, 4, 256, 0.1, vocab_size};
}
ModelConfig ModelConfig::hibert_s(int vocab_size) {
  return ModelConfig{6, 512, 8, 2048, 0.1, vocab_size};
}
ModelConfig ModelConfig::hibert_m(int vocab_size) {
  return ModelConfig{6, 768, 12, 3072, 0.1, vocab_size};
}

namespace {

LayerParams init_layer(int h, int ff, Rng& rng) {
  LayerParams p;
  p.ln1_gain = Tensor::full({h}, 1.0, true);
  p.ln1_bias = Tensor::zeros({h}, true);
  p.attn.wq = Tensor::xavier_uniform({h, h}, rng, true);
  p.attn.bq = Tensor::zeros({h}, true);
  p.attn.wk = Tensor::xavier_uniform({h, h}, rng, true);
  p.attn.bk = Tensor::zeros({h}, true);
  p.attn.wv = Tensor::xavier_uniform({h, h}, rng, true);
  p.attn.bv = Tensor::zeros({h}, true);
  p.attn.wo = Tensor::xavier_uniform({h, h}, rng, true);
  p.attn.bo = Tensor::zeros({h}, true);
  p.ln2_gain = Tensor::full({h}, 1.0, true);
  p.ln2_bias = Tensor::zeros({h}, true);
  p.ff_w1 = Tensor::xavier_uniform({h, ff}, rng, true);
  p.ff_b1 = Tensor::zeros({ff}, true);
  p.ff_w2 = Tensor::xavier_uniform({ff, h}, rng, true);
  p.ff_b2 = Tensor::zeros({h}, true);
  return p;
}

void name_layer(ParamMap& map, const std::string& prefix, const LayerParams& p) {
  map.add(prefix + ".ln1.gain", p.ln1_gain);
  map.add(prefix + ".ln1.bias", p.ln1_bias);
  map.add(prefix + ".attn.wq", p.attn.wq);
  map.add(prefix + ".attn.bq.bias", p.attn.bq);
  map.add(prefix + ".attn.wk", p.attn.wk);
  map.add(prefix + ".attn.bk.bias", p.attn.bk);
  map.add(prefix + ".attn.wv", p.attn.wv);
  map.add(prefix + ".attn.bv.bias", p.attn.bv);
  map.add(prefix + ".attn.wo", p.attn.wo);
  map.add(prefix + ".attn.bo.bias", p.attn.bo);
  map.add(prefix + ".ln2.gain", p.ln2_gain);
  map.add(prefix + ".ln2.bias", p.ln2_bias);
  map.add(prefix + ".ff.w1", p.ff_w1);
  map.add(prefix + ".ff.b1.bias", p.ff_b1);
  map.add(prefix + ".ff.w2", p.ff_w2);
  map.add(prefix + ".ff.b2.bias", p.ff_b2);
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  ModelParams p;
  p.config = config;
  p.word_embed = Tensor::randn({config.vocab_size, config.hidden}, rng, 0.02, true);
  for (int i = 0; i < config.layers; ++i)
    p.sent_enc.layers.push_back(init_layer(config.hidden, config.ff, rng));
  for (int i = 0; i < config.layers; ++i)
    p.doc_enc.layers.push_back(init_layer(config.hidden, config.ff, rng));
  for (int i = 0; i < config.layers; ++i)
    p.decoder.layers.push_back(init_layer(config.hidden, config.ff, rng));
  p.out_proj_w = Tensor::xavier_uniform({config.hidden, config.vocab_size}, rng, true);
  p.out_proj_b = Tensor::zeros({config.vocab_size}, true);
  p.cls_w = Tensor::xavier_uniform({config.hidden, 2}, rng, true);
  p.cls_b = Tensor::zeros({2}, true);
  return p;
}

ParamMap ModelParams::named() const {
  ParamMap map;
  map.add("embed.word", word_embed);
  auto add_stack = [&](const std::string& prefix, const StackParams& s) {
    for (size_t i = 0; i < s.layers.size(); ++i)
      name_layer(map, prefix + ".layer" + std::to_string(i), s.layers[i]);
  };
  add_stack("sent_enc", sent_enc);
  add_stack("doc_enc", doc_enc);
  add_stack("decoder", decoder);
  map.add("decoder.out_proj.w", out_proj_w);
  map.add("decoder.out_proj.b.bias", out_proj_b);
  map.add("cls.w", cls_w);
  map.add("cls.b.bias", cls_b);
  return map;
}

Tensor sincos_position(long pos, int d) {
  if (d <= 0 || d % 2 != 0)
    throw std::invalid_argument("sincos_position: dimension must be positive and even");
  Tensor out = Tensor::zeros({d});
  for (int i = 0; i < d / 2; ++i) {
    Scalar freq = std::pow(10000.0, -2.0 * i / static_cast<Scalar>(d));
    out.mut(2 * i) = std::sin(static_cast<Scalar>(pos) * freq);
    out.mut(2 * i + 1) = std::cos(static_cast<Scalar>(pos) * freq);
  }
  return out;
}

Tensor sincos_rows(long start, long count, int d) {
  Tensor out = Tensor::zeros({count, d});
  for (long r = 0; r < count; ++r) {
    Tensor row = sincos_position(start + r, d);
    out.data().segment(r * d, d) = row.data();
  }
  return out;
}

Tensor causal_mask(Index n) {
  Tensor m = Tensor::zeros({n, n});
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) m.mut(i * n + j) = kMaskValue;
  return m;
}

Tensor key_pad_mask(const std::vector<bool>& pad, Index query_rows) {
  Index n = static_cast<Index>(pad.size());
  Tensor m = Tensor::zeros({query_rows, n});
  for (Index i = 0; i < query_rows; ++i)
    for (Index j = 0; j < n; ++j)
      if (pad[static_cast<size_t>(j)]) m.mut(i * n + j) = kMaskValue;
  return m;
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttnParams& params, int heads, const Tensor& mask,
                            const RunContext& ctx) {
  Index h = params.wq.dim(0);
  Index nq = q.dim(0), nk = k.dim(0);
  if (mask.defined() && (mask.dim(0) != nq || mask.dim(1) != nk))
    throw std::invalid_argument("multi_head_attention: mask " + shape_str(mask.shape()) +
                                " does not cover [" + std::to_string(nq) + "," +
                                std::to_string(nk) + "]");
  Index hd = h / heads;
  Scalar scaling = 1.0 / std::sqrt(static_cast<Scalar>(hd));

  Tensor qp = add(matmul(q, params.wq), params.bq);
  Tensor kp = add(matmul(k, params.wk), params.bk);
  Tensor vp = add(matmul(v, params.wv), params.bv);

  std::vector<Tensor> head_outs;
  for (int a = 0; a < heads; ++a) {
    Tensor qa = slice_cols(qp, a * hd, (a + 1) * hd);
    Tensor ka = slice_cols(kp, a * hd, (a + 1) * hd);
    Tensor va = slice_cols(vp, a * hd, (a + 1) * hd);
    Tensor scores = scale(matmul(qa, transpose(ka)), scaling);
    if (mask.defined()) scores = add(scores, mask);
    Tensor weights = softmax(scores, 1);
    head_outs.push_back(matmul(weights, va));
  }
  Tensor concat = concat_cols(head_outs);
  return add(matmul(concat, params.wo), params.bo);
}

namespace {

Tensor maybe_dropout(const Tensor& x, const RunContext& ctx) {
  if (!ctx.training || ctx.dropout == 0.0 || ctx.rng == nullptr) return x;
  return dropout(x, ctx.dropout, true, *ctx.rng);
}

Tensor feed_forward(const Tensor& x, const LayerParams& p) {
  Tensor hmid = relu(add(matmul(x, p.ff_w1), p.ff_b1));
  return add(matmul(hmid, p.ff_w2), p.ff_b2);
}

}  // namespace

Tensor encoder_layer(const Tensor& x, const std::vector<bool>& pad_mask,
                     const LayerParams& params, int heads, const RunContext& ctx) {
  Tensor mask;
  if (!pad_mask.empty()) {
    if (static_cast<Index>(pad_mask.size()) != x.dim(0))
      throw std::invalid_argument("encoder_layer: pad_mask size mismatch");
    mask = key_pad_mask(pad_mask, x.dim(0));
  }
  Tensor norm1 = layer_norm(x, params.ln1_gain, params.ln1_bias);
  Tensor attn = multi_head_attention(norm1, norm1, norm1, params.attn, heads, mask, ctx);
  Tensor x1 = add(x, maybe_dropout(attn, ctx));
  Tensor norm2 = layer_norm(x1, params.ln2_gain, params.ln2_bias);
  return add(x1, maybe_dropout(feed_forward(norm2, params), ctx));
}

Tensor run_stack(const Tensor& x, const std::vector<bool>& pad_mask, const StackParams& stack,
                 int heads, const RunContext& ctx) {
  Tensor cur = x;
  for (const auto& layer : stack.layers) cur = encoder_layer(cur, pad_mask, layer, heads, ctx);
  return cur;
}

Tensor encode_sentence(const std::vector<int>& ids, long sentence_index,
                       const ModelParams& params, const RunContext& ctx) {
  if (ids.empty() || ids.back() != Vocab::kEos)
    throw std::invalid_argument("encode_sentence: sentence must end with EOS");
  Index n = static_cast<Index>(ids.size());
  int h = params.config.hidden;
  Tensor x = add(embedding_lookup(params.word_embed, ids), sincos_rows(0, n, h));
  Tensor enc = run_stack(x, {}, params.sent_enc, params.config.heads, ctx);
  Tensor at_eos = slice_rows(enc, n - 1, n);
  Tensor with_pos = add(at_eos, sincos_position(sentence_index, h));
  return reshape(with_pos, {h});
}

SentenceRepr encode_document(const Document& doc, const ModelParams& params,
                             const RunContext& ctx) {
  if (doc.sentences.empty()) throw std::invalid_argument("encode_document: empty document");
  std::vector<Tensor> rows;
  for (size_t i = 0; i < doc.sentences.size(); ++i)
    rows.push_back(encode_sentence(doc.sentences[i], static_cast<long>(i), params, ctx));
  SentenceRepr repr;
  repr.h_hat = concat_rows(rows);
  repr.d = run_stack(repr.h_hat, {}, params.doc_enc, params.config.heads, ctx);
  return repr;
}

}  // namespace hibert

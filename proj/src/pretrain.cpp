#include "hibert/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hibert {

std::string tag_name(TransformTag tag) {
  switch (tag) {
    case TransformTag::Masked: return "MASKED";
    case TransformTag::Kept: return "KEPT";
    case TransformTag::Replaced: return "REPLACED";
  }
  return "?";
}

MaskedDocument select_and_mask(const Document& doc, Rng& rng, const ReplacementPool& pool) {
  size_t n = doc.sentences.size();
  if (n == 0) throw std::invalid_argument("select_and_mask: empty document");
  size_t count = static_cast<size_t>(
      std::max<long>(1, std::lround(0.15 * static_cast<double>(n))));

  // Partial Fisher-Yates for distinct uniform indices.
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (size_t i = 0; i < count; ++i) {
    size_t j = i + static_cast<size_t>(rng.below(n - i));
    std::swap(order[i], order[j]);
  }
  std::vector<long> selected(order.begin(), order.begin() + static_cast<long>(count));
  std::sort(selected.begin(), selected.end());

  MaskedDocument out;
  out.transformed = doc;
  out.selected = selected;
  for (long k : selected) {
    const std::vector<int>& orig = doc.sentences[static_cast<size_t>(k)];
    double u = rng.uniform();
    TransformTag tag = u < 0.8   ? TransformTag::Masked
                       : u < 0.9 ? TransformTag::Kept
                                 : TransformTag::Replaced;
    if (tag == TransformTag::Replaced && pool.sentences.empty()) tag = TransformTag::Masked;

    if (tag == TransformTag::Masked) {
      std::vector<int> masked(orig.size(), Vocab::kMask);
      masked.back() = Vocab::kEos;  // length stays visible
      out.transformed.sentences[static_cast<size_t>(k)] = std::move(masked);
    } else if (tag == TransformTag::Replaced) {
      const std::vector<int>& pick =
          pool.sentences[static_cast<size_t>(rng.below(pool.sentences.size()))];
      std::vector<int> repl;
      for (int id : pick) {
        if (id == Vocab::kEos) break;
        if (repl.size() == static_cast<size_t>(kMaxSentenceTokens)) break;
        repl.push_back(id);
      }
      repl.push_back(Vocab::kEos);
      out.transformed.sentences[static_cast<size_t>(k)] = std::move(repl);
    }

    std::vector<int> target;
    target.push_back(Vocab::kBos);
    target.insert(target.end(), orig.begin(), orig.end());
    out.targets.push_back(std::move(target));
    out.tags.push_back(tag);
  }
  return out;
}

Tensor decoder_forward(const std::vector<int>& prefix, const Tensor& d_k,
                       const ModelParams& params, const RunContext& ctx) {
  if (prefix.empty() || prefix.front() != Vocab::kBos)
    throw std::invalid_argument("decoder_forward: prefix must start with BOS");
  Index n = static_cast<Index>(prefix.size());
  int h = params.config.hidden;
  Tensor x = add(embedding_lookup(params.word_embed, prefix), sincos_rows(0, n, h));
  Tensor causal = causal_mask(n);
  for (const auto& layer : params.decoder.layers) {
    Tensor norm1 = layer_norm(x, layer.ln1_gain, layer.ln1_bias);
    Tensor attn =
        multi_head_attention(norm1, norm1, norm1, layer.attn, params.config.heads, causal, ctx);
    Tensor x1 = add(x, (ctx.training && ctx.dropout > 0.0 && ctx.rng)
                           ? dropout(attn, ctx.dropout, true, *ctx.rng)
                           : attn);
    // Document context enters each layer by addition to every position.
    Tensor x2 = add(x1, d_k);
    Tensor norm2 = layer_norm(x2, layer.ln2_gain, layer.ln2_bias);
    Tensor ff = add(matmul(relu(add(matmul(norm2, layer.ff_w1), layer.ff_b1)), layer.ff_w2),
                    layer.ff_b2);
    x = add(x2, (ctx.training && ctx.dropout > 0.0 && ctx.rng)
                    ? dropout(ff, ctx.dropout, true, *ctx.rng)
                    : ff);
  }
  return add(matmul(x, params.out_proj_w), params.out_proj_b);
}

namespace {

// Sum of token NLLs and the token count for one masked document.
std::pair<Tensor, long> pretrain_nll_sum(const MaskedDocument& masked,
                                         const ModelParams& params, const RunContext& ctx) {
  SentenceRepr repr = encode_document(masked.transformed, params, ctx);
  Tensor total;
  long tokens = 0;
  for (size_t s = 0; s < masked.selected.size(); ++s) {
    long k = masked.selected[s];
    const std::vector<int>& target = masked.targets[s];  // BOS w_1 .. w_n(EOS)
    std::vector<int> prefix(target.begin(), target.end() - 1);
    std::vector<int> next(target.begin() + 1, target.end());
    Tensor d_k = reshape(slice_rows(repr.d, k, k + 1), {params.config.hidden});
    Tensor logits = decoder_forward(prefix, d_k, params, ctx);
    long n = static_cast<long>(next.size());
    Tensor nll =
        scale(nll_loss(logits, next, std::vector<bool>(next.size(), true)),
              static_cast<Scalar>(n));
    total = total.defined() ? add(total, nll) : nll;
    tokens += n;
  }
  return {total, tokens};
}

}  // namespace

Tensor pretrain_loss(const MaskedDocument& masked, const ModelParams& params,
                     const RunContext& ctx) {
  auto [total, tokens] = pretrain_nll_sum(masked, params, ctx);
  return scale(total, 1.0 / static_cast<Scalar>(tokens));
}

Scalar validation_perplexity(const std::vector<Document>& docs, const ModelParams& params,
                             const ReplacementPool& pool, uint64_t mask_seed) {
  RunContext eval_ctx;
  Scalar total_nll = 0.0;
  long total_tokens = 0;
  for (size_t i = 0; i < docs.size(); ++i) {
    Rng rng(Rng::mix(mask_seed, i));
    MaskedDocument masked = select_and_mask(docs[i], rng, pool);
    auto [nll, tokens] = pretrain_nll_sum(masked, params, eval_ctx);
    total_nll += nll.item();
    total_tokens += tokens;
  }
  if (total_tokens == 0) return 1.0;
  return std::exp(total_nll / static_cast<Scalar>(total_tokens));
}

PretrainResult pretrain_run(ModelParams& params, AdamState& adam, TrainerState& state,
                            const std::vector<PretrainStage>& stages,
                            const PretrainOptions& options, const StepHook& hook,
                            const StageHook& stage_end) {
  if (stages.empty()) throw std::invalid_argument("pretrain_run: no stages");
  for (const auto& st : stages)
    if (st.train.empty()) throw std::invalid_argument("pretrain_run: empty corpus in stage " + st.name);

  PretrainResult result;
  ParamMap named = params.named();

  for (; state.stage_index < static_cast<long>(stages.size()); ++state.stage_index) {
    const PretrainStage& stage = stages[static_cast<size_t>(state.stage_index)];
    // The replacement pool is every training sentence of the stage.
    ReplacementPool pool;
    for (const auto& d : stage.train)
      for (const auto& s : d.sentences) pool.sentences.push_back(s);
    uint64_t val_seed = Rng::mix(options.seed, 0xa1u + static_cast<uint64_t>(state.stage_index));

    bool stage_done = false;
    for (; state.epoch < options.max_epochs && !stage_done; ++state.epoch) {
      // Epoch-scoped randomness: shuffle order, then fresh maskings.
      Rng epoch_rng(Rng::mix(Rng::mix(options.seed, static_cast<uint64_t>(state.stage_index)),
                             static_cast<uint64_t>(state.epoch)));
      std::vector<size_t> order(stage.train.size());
      std::iota(order.begin(), order.end(), 0);
      for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<size_t>(epoch_rng.below(i))]);
      std::vector<MaskedDocument> masked;
      masked.reserve(order.size());
      for (size_t ix : order) masked.push_back(select_and_mask(stage.train[ix], epoch_rng, pool));

      long batches = (static_cast<long>(masked.size()) + options.batch_size - 1) / options.batch_size;
      for (long b = state.epoch_pos; b < batches; ++b) {
        size_t lo = static_cast<size_t>(b) * static_cast<size_t>(options.batch_size);
        size_t hi = std::min(masked.size(), lo + static_cast<size_t>(options.batch_size));
        Rng step_rng(Rng::mix(options.seed, 0xd20u + static_cast<uint64_t>(state.step + 1)));
        RunContext ctx{true, options.dropout, &step_rng};

        named.zero_grad();
        Scalar batch_loss = 0.0;
        for (size_t i = lo; i < hi; ++i) {
          Tensor loss = scale(pretrain_loss(masked[i], params, ctx),
                              1.0 / static_cast<Scalar>(hi - lo));
          backward(loss);
          batch_loss += loss.item();
        }
        adam_step(named, adam, options.schedule, options.adam);
        state.step += 1;
        state.epoch_pos = b + 1;

        TrainLogEntry entry{state.step, stage.name, lr_at(options.schedule, adam.step),
                            batch_loss, -1.0};
        result.log.push_back(entry);
        if (hook && !hook(state, entry)) {
          result.interrupted = true;
          return result;
        }
        if (options.max_steps > 0 && state.step >= options.max_steps) {
          stage_done = true;
          break;
        }
      }
      state.epoch_pos = 0;
      if (stage_done) break;

      if (!stage.valid.empty()) {
        Scalar ppl = validation_perplexity(stage.valid, params, pool, val_seed);
        // Validation records carry no train loss; a resumed run could not
        // reconstruct it, and log identity across resumes matters more.
        TrainLogEntry entry{state.step, stage.name, lr_at(options.schedule, std::max(1L, adam.step)),
                            0.0, ppl};
        result.log.push_back(entry);
        if (ppl < state.best_ppl * (1.0 - options.min_rel_improvement)) {
          state.best_ppl = ppl;
          state.bad_evals = 0;
        } else {
          state.bad_evals += 1;
          if (state.bad_evals >= options.patience) stage_done = true;
        }
        if (options.stop_below_ppl > 0.0 && ppl < options.stop_below_ppl) stage_done = true;
      }
    }
    result.stage_names.push_back(stage.name);
    if (stage_end) stage_end(state.stage_index, stage.name);
    state.epoch = 0;
    state.epoch_pos = 0;
    state.best_ppl = 1e300;
    state.bad_evals = 0;
    if (options.max_steps > 0 && state.step >= options.max_steps) {
      // Remaining stages still appear in the lineage bookkeeping only if run.
      state.stage_index += 1;
      break;
    }
  }
  return result;
}

}  // namespace hibert

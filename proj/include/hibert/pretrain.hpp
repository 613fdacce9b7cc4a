#pragma once

#include <string>
#include <vector>

#include "hibert/encoder.hpp"

namespace hibert {

enum class TransformTag { Masked, Kept, Replaced };

/// Document after the 80/10/10 transform, with the selected indices and the
/// original (BOS-prefixed, EOS-terminated) target sentences.
struct MaskedDocument {
  Document transformed;
  std::vector<long> selected;           // ascending
  std::vector<TransformTag> tags;       // parallel to selected
  std::vector<std::vector<int>> targets;  // parallel to selected
};

/// Sentences available for the REPLACED transform.
struct ReplacementPool {
  std::vector<std::vector<int>> sentences;  // each EOS-terminated
};

/// Select max(1, round(0.15 * n)) distinct sentences; mask each with
/// probabilities 0.8 / 0.1 / 0.1 (mask all content tokens / keep / swap in a
/// random pool sentence). An empty pool falls back to masking.
MaskedDocument select_and_mask(const Document& doc, Rng& rng, const ReplacementPool& pool);

/// One decoder pass over a BOS-prefixed target prefix, conditioned on the
/// sentence representation d_k. Returns next-token logits, one row per
/// prefix position.
Tensor decoder_forward(const std::vector<int>& prefix, const Tensor& d_k,
                       const ModelParams& params, const RunContext& ctx);

/// Mean per-token negative log-likelihood of all masked sentences given the
/// transformed document (teacher-forced).
Tensor pretrain_loss(const MaskedDocument& masked, const ModelParams& params,
                     const RunContext& ctx);

/// Masked-sentence perplexity of `docs` under a fixed masking seed.
Scalar validation_perplexity(const std::vector<Document>& docs, const ModelParams& params,
                             const ReplacementPool& pool, uint64_t mask_seed);

struct TrainLogEntry {
  long step = 0;
  std::string stage;
  Scalar lr = 0.0;
  Scalar train_loss = 0.0;
  Scalar val_ppl = -1.0;  // < 0 when no evaluation happened at this step
};

struct PretrainStage {
  std::string name;
  std::vector<Document> train;
  std::vector<Document> valid;
};

struct PretrainOptions {
  Schedule schedule{1e-4, 10000};
  AdamConfig adam{};
  int batch_size = 8;
  long max_epochs = 50;
  long max_steps = 0;  // 0 = no cap
  int patience = 3;
  Scalar min_rel_improvement = 0.005;
  Scalar dropout = 0.1;
  uint64_t seed = 0;
  Scalar stop_below_ppl = 0.0;  // early exit once validation ppl drops under this
};

struct PretrainResult {
  std::vector<TrainLogEntry> log;
  std::vector<std::string> stage_names;  // params lineage, one entry per stage run
  bool interrupted = false;              // a hook requested a stop
};

/// Loop position and early-stop bookkeeping; checkpointed so a resumed run
/// re-enters the loop exactly where it left off.
struct TrainerState {
  long step = 0;
  long stage_index = 0;
  long epoch = 0;
  long epoch_pos = 0;  // batches already completed in the current epoch
  Scalar best_ppl = 1e300;
  long bad_evals = 0;
};

/// Hook invoked after every optimizer step; return false to request a stop
/// (used for mid-run checkpointing in the CLI).
using StepHook = std::function<bool(const TrainerState& state, const TrainLogEntry& entry)>;

/// Sequential multi-stage pre-training. All randomness (shuffling, masking,
/// dropout) is a pure function of (seed, stage, epoch, step), so resuming
/// from a checkpointed TrainerState continues the interrupted trajectory
/// exactly.
/// Called when a stage finishes (per-stage checkpointing).
using StageHook = std::function<void(long stage_index, const std::string& name)>;

PretrainResult pretrain_run(ModelParams& params, AdamState& adam, TrainerState& state,
                            const std::vector<PretrainStage>& stages,
                            const PretrainOptions& options, const StepHook& hook = nullptr,
                            const StageHook& stage_end = nullptr);

std::string tag_name(TransformTag tag);

}  // namespace hibert

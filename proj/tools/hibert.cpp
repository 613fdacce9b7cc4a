// hibert: build-vocab | pretrain | finetune | label | evaluate
//
// Every setting can come from a --config key=value file; flags given on the
// command line win over file values, file values win over defaults.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hibert/commands.hpp"

using namespace hibert;

namespace {

struct Shared {
  std::string config_path;
  std::string out_dir;
  std::string checkpoint;
  long seed = -1;  // -1: not given on the command line
};

void add_shared(CLI::App* cmd, Shared& s) {
  cmd->add_option("--config", s.config_path, "key=value configuration file");
  cmd->add_option("--seed", s.seed, "random seed");
  cmd->add_option("--out-dir", s.out_dir, "output directory");
  cmd->add_option("--checkpoint", s.checkpoint, "initial checkpoint path");
}

Config load_config(const Shared& s) {
  return s.config_path.empty() ? Config{} : Config::from_file(s.config_path);
}

// flag > config file > default
std::string pick(const CLI::App* cmd, const std::string& flag, const std::string& flag_value,
                 const Config& cfg, const std::string& key, const std::string& fallback) {
  if (cmd->count(flag) > 0) return flag_value;
  return cfg.get(key, fallback);
}

ModelConfig model_from(const Config& cfg) {
  std::string preset = cfg.get("model", "tiny");
  ModelConfig m;
  if (preset == "tiny") m = ModelConfig::tiny(0);
  else if (preset == "s") m = ModelConfig::hibert_s(0);
  else if (preset == "m") m = ModelConfig::hibert_m(0);
  else throw std::runtime_error("unknown model preset: " + preset);
  m.layers = static_cast<int>(cfg.get_long("layers", m.layers));
  m.hidden = static_cast<int>(cfg.get_long("hidden", m.hidden));
  m.heads = static_cast<int>(cfg.get_long("heads", m.heads));
  m.ff = static_cast<int>(cfg.get_long("ff", 4 * m.hidden));
  m.dropout = cfg.get_double("dropout", m.dropout);
  return m;
}

uint64_t seed_from(const Shared& s, const Config& cfg) {
  if (s.seed >= 0) return static_cast<uint64_t>(s.seed);
  return static_cast<uint64_t>(cfg.get_long("seed", 0));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical document encoder for extractive summarization"};
  app.require_subcommand(1);
  int rc = 1;

  // build-vocab ------------------------------------------------------------
  auto* bv = app.add_subcommand("build-vocab", "Train BPE merges and a vocabulary");
  auto bv_shared = std::make_shared<Shared>();
  auto bv_flags = std::make_shared<BuildVocabArgs>();
  add_shared(bv, *bv_shared);
  bv->add_option("--corpus", bv_flags->corpus_path, "training corpus (jsonl)");
  bv->add_option("--num-merges", bv_flags->num_merges, "BPE merge count");
  bv->add_option("--vocab-out", bv_flags->vocab_out, "vocabulary output path");
  bv->add_option("--merges-out", bv_flags->merges_out, "merge rules output path");
  bv->callback([&rc, bv, bv_shared, bv_flags] {
    Config cfg = load_config(*bv_shared);
    BuildVocabArgs a;
    a.corpus_path = pick(bv, "--corpus", bv_flags->corpus_path, cfg, "corpus", "");
    a.num_merges = bv->count("--num-merges") ? bv_flags->num_merges
                                             : static_cast<int>(cfg.get_long("num_merges", 100));
    a.vocab_out = pick(bv, "--vocab-out", bv_flags->vocab_out, cfg, "vocab_out", "vocab.txt");
    a.merges_out = pick(bv, "--merges-out", bv_flags->merges_out, cfg, "merges_out", "merges.txt");
    if (a.corpus_path.empty()) throw std::runtime_error("build-vocab: --corpus is required");
    rc = cmd_build_vocab(a);
  });

  // pretrain ---------------------------------------------------------------
  auto* pt = app.add_subcommand("pretrain", "Masked-sentence pre-training");
  auto pt_shared = std::make_shared<Shared>();
  auto pt_flags = std::make_shared<PretrainArgs>();
  add_shared(pt, *pt_shared);
  pt->add_option("--vocab", pt_flags->vocab_path, "vocabulary file");
  pt->add_option("--merges", pt_flags->merges_path, "BPE merges file");
  pt->add_option("--stage", pt_flags->stage_corpora, "stage corpus (repeat per stage)");
  pt->add_option("--valid", pt_flags->valid_path, "validation corpus");
  pt->add_option("--checkpoint-every", pt_flags->checkpoint_every, "snapshot period in steps");
  pt->add_option("--stop-after-step", pt_flags->stop_after_step, "interrupt after step N");
  pt->callback([&rc, pt, pt_shared, pt_flags] {
    Config cfg = load_config(*pt_shared);
    PretrainArgs a;
    a.vocab_path = pick(pt, "--vocab", pt_flags->vocab_path, cfg, "vocab", "");
    a.merges_path = pick(pt, "--merges", pt_flags->merges_path, cfg, "merges", "");
    if (pt->count("--stage")) {
      a.stage_corpora = pt_flags->stage_corpora;
    } else {
      for (int i = 1; cfg.has("stage" + std::to_string(i)); ++i)
        a.stage_corpora.push_back(cfg.get("stage" + std::to_string(i), ""));
    }
    a.valid_path = pick(pt, "--valid", pt_flags->valid_path, cfg, "valid", "");
    a.out_dir = pt->count("--out-dir") ? pt_shared->out_dir : cfg.get("out_dir", "out");
    a.init_checkpoint =
        pt->count("--checkpoint") ? pt_shared->checkpoint : cfg.get("checkpoint", "");
    a.model = model_from(cfg);
    a.options.seed = seed_from(*pt_shared, cfg);
    a.options.schedule.base_lr = cfg.get_double("lr", a.options.schedule.base_lr);
    a.options.schedule.warmup_steps = cfg.get_long("warmup", a.options.schedule.warmup_steps);
    a.options.batch_size = static_cast<int>(cfg.get_long("batch_size", a.options.batch_size));
    a.options.max_epochs = cfg.get_long("max_epochs", a.options.max_epochs);
    a.options.max_steps = cfg.get_long("max_steps", a.options.max_steps);
    a.options.patience = static_cast<int>(cfg.get_long("patience", a.options.patience));
    a.options.dropout = cfg.get_double("dropout", a.options.dropout);
    a.options.stop_below_ppl = cfg.get_double("stop_below_ppl", a.options.stop_below_ppl);
    a.checkpoint_every = pt->count("--checkpoint-every")
                             ? pt_flags->checkpoint_every
                             : cfg.get_long("checkpoint_every", 0);
    a.stop_after_step = pt->count("--stop-after-step") ? pt_flags->stop_after_step
                                                       : cfg.get_long("stop_after_step", 0);
    if (a.vocab_path.empty() || a.merges_path.empty())
      throw std::runtime_error("pretrain: --vocab and --merges are required");
    if (a.stage_corpora.empty())
      throw std::runtime_error("pretrain: at least one --stage corpus is required");
    rc = cmd_pretrain(a);
  });

  // finetune ---------------------------------------------------------------
  auto* ft = app.add_subcommand("finetune", "Fine-tune the extractive head");
  auto ft_shared = std::make_shared<Shared>();
  auto ft_flags = std::make_shared<FinetuneArgs>();
  add_shared(ft, *ft_shared);
  ft->add_option("--vocab", ft_flags->vocab_path, "vocabulary file");
  ft->add_option("--merges", ft_flags->merges_path, "BPE merges file");
  ft->add_option("--train", ft_flags->train_path, "labeled training corpus");
  ft->add_option("--valid", ft_flags->valid_path, "labeled validation corpus");
  ft->callback([&rc, ft, ft_shared, ft_flags] {
    Config cfg = load_config(*ft_shared);
    FinetuneArgs a;
    a.vocab_path = pick(ft, "--vocab", ft_flags->vocab_path, cfg, "vocab", "");
    a.merges_path = pick(ft, "--merges", ft_flags->merges_path, cfg, "merges", "");
    a.train_path = pick(ft, "--train", ft_flags->train_path, cfg, "train", "");
    a.valid_path = pick(ft, "--valid", ft_flags->valid_path, cfg, "valid", "");
    a.out_dir = ft->count("--out-dir") ? ft_shared->out_dir : cfg.get("out_dir", "out");
    a.init_checkpoint =
        ft->count("--checkpoint") ? ft_shared->checkpoint : cfg.get("checkpoint", "");
    a.model = model_from(cfg);
    a.options.seed = seed_from(*ft_shared, cfg);
    a.options.schedule.base_lr = cfg.get_double("lr", a.options.schedule.base_lr);
    a.options.schedule.warmup_steps = cfg.get_long("warmup", a.options.schedule.warmup_steps);
    a.options.batch_size = static_cast<int>(cfg.get_long("batch_size", a.options.batch_size));
    a.options.epochs = cfg.get_long("epochs", a.options.epochs);
    a.options.dropout = cfg.get_double("dropout", a.options.dropout);
    if (a.vocab_path.empty() || a.merges_path.empty() || a.train_path.empty())
      throw std::runtime_error("finetune: --vocab, --merges and --train are required");
    rc = cmd_finetune(a);
  });

  // label ------------------------------------------------------------------
  auto* lb = app.add_subcommand("label", "Derive oracle sentence labels");
  auto lb_shared = std::make_shared<Shared>();
  auto lb_flags = std::make_shared<LabelArgs>();
  add_shared(lb, *lb_shared);
  lb->add_option("--vocab", lb_flags->vocab_path, "vocabulary file");
  lb->add_option("--merges", lb_flags->merges_path, "BPE merges file");
  lb->add_option("--corpus", lb_flags->corpus_path, "corpus with summaries");
  lb->add_option("--out", lb_flags->out_path, "labeled corpus output path");
  lb->add_option("--max-selected", lb_flags->max_selected, "oracle selection cap");
  lb->callback([&rc, lb, lb_shared, lb_flags] {
    Config cfg = load_config(*lb_shared);
    LabelArgs a;
    a.vocab_path = pick(lb, "--vocab", lb_flags->vocab_path, cfg, "vocab", "");
    a.merges_path = pick(lb, "--merges", lb_flags->merges_path, cfg, "merges", "");
    a.corpus_path = pick(lb, "--corpus", lb_flags->corpus_path, cfg, "corpus", "");
    a.out_path = pick(lb, "--out", lb_flags->out_path, cfg, "out", "labeled.jsonl");
    a.max_selected = lb->count("--max-selected")
                         ? lb_flags->max_selected
                         : static_cast<int>(cfg.get_long("max_selected", 3));
    if (a.vocab_path.empty() || a.merges_path.empty() || a.corpus_path.empty())
      throw std::runtime_error("label: --vocab, --merges and --corpus are required");
    rc = cmd_label(a);
  });

  // evaluate ---------------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "ROUGE report for a checkpoint");
  auto ev_shared = std::make_shared<Shared>();
  auto ev_flags = std::make_shared<EvaluateArgs>();
  add_shared(ev, *ev_shared);
  ev->add_option("--vocab", ev_flags->vocab_path, "vocabulary file");
  ev->add_option("--merges", ev_flags->merges_path, "BPE merges file");
  ev->add_option("--test", ev_flags->test_path, "test corpus with summaries");
  ev->add_option("--valid", ev_flags->valid_path, "validation corpus for --k tune");
  ev->add_option("--k", ev_flags->k, "summary length K, or \"tune\"");
  ev->callback([&rc, ev, ev_shared, ev_flags] {
    Config cfg = load_config(*ev_shared);
    EvaluateArgs a;
    a.vocab_path = pick(ev, "--vocab", ev_flags->vocab_path, cfg, "vocab", "");
    a.merges_path = pick(ev, "--merges", ev_flags->merges_path, cfg, "merges", "");
    a.checkpoint_path =
        ev->count("--checkpoint") ? ev_shared->checkpoint : cfg.get("checkpoint", "");
    a.test_path = pick(ev, "--test", ev_flags->test_path, cfg, "test", "");
    a.valid_path = pick(ev, "--valid", ev_flags->valid_path, cfg, "valid", "");
    a.out_dir = ev->count("--out-dir") ? ev_shared->out_dir : cfg.get("out_dir", "out");
    a.k = pick(ev, "--k", ev_flags->k, cfg, "k", "3");
    if (a.vocab_path.empty() || a.merges_path.empty() || a.checkpoint_path.empty() ||
        a.test_path.empty())
      throw std::runtime_error("evaluate: --vocab, --merges, --checkpoint and --test are required");
    rc = cmd_evaluate(a);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}

#pragma once

#include <map>
#include <string>
#include <vector>

#include "hibert/checkpoint.hpp"
#include "hibert/corpus.hpp"
#include "hibert/pretrain.hpp"
#include "hibert/summarizer.hpp"

namespace hibert {

/// Flat key=value configuration file; command-line flags override file
/// values, file values override defaults.
class Config {
 public:
  static Config from_file(const std::string& path);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  long get_long(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;

 private:
  std::map<std::string, std::string> values_;
};

struct BuildVocabArgs {
  std::string corpus_path;
  int num_merges = 100;
  std::string vocab_out;
  std::string merges_out;
};

struct PretrainArgs {
  std::string vocab_path;
  std::string merges_path;
  std::vector<std::string> stage_corpora;  // one path per pre-training stage
  std::string valid_path;                  // empty: validate on the training corpus
  std::string out_dir;
  std::string init_checkpoint;             // resume point, empty for fresh start
  ModelConfig model;                       // vocab_size filled from the vocab file
  PretrainOptions options;
  long checkpoint_every = 0;               // steps; 0 disables periodic snapshots
  long stop_after_step = 0;                // interrupt for resume testing; 0 disables
};

struct FinetuneArgs {
  std::string vocab_path;
  std::string merges_path;
  std::string train_path;  // labeled corpus (cmd_label output)
  std::string valid_path;  // optional
  std::string out_dir;
  std::string init_checkpoint;  // pretrained weights, empty = random init
  ModelConfig model;
  FinetuneOptions options;
};

struct LabelArgs {
  std::string vocab_path;
  std::string merges_path;
  std::string corpus_path;  // records with summaries
  std::string out_path;
  int max_selected = 3;
};

struct EvaluateArgs {
  std::string vocab_path;
  std::string merges_path;
  std::string checkpoint_path;
  std::string test_path;
  std::string valid_path;   // needed when k == "tune"
  std::string out_dir;
  std::string k = "3";      // integer or "tune"
};

int cmd_build_vocab(const BuildVocabArgs& args);
int cmd_pretrain(const PretrainArgs& args);
int cmd_finetune(const FinetuneArgs& args);
int cmd_label(const LabelArgs& args);
int cmd_evaluate(const EvaluateArgs& args);

/// Deterministic formatting shared by logs and reports.
std::string format_double(double v);
void write_train_log(const std::string& path, const std::vector<TrainLogEntry>& log);
std::vector<TrainLogEntry> read_train_log(const std::string& path);

}  // namespace hibert

#include "hibert/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace hibert {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- config ---------------------------------------------------------------

namespace {
std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}
}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  Config c;
  std::string line;
  long n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: " + path + ":" + std::to_string(n) +
                               ": expected key = value");
    c.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return c;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

long Config::get_long(const std::string& key, long fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : std::stol(it->second);
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : std::stod(it->second);
}

// ---- logs -----------------------------------------------------------------

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_train_log(const std::string& path, const std::vector<TrainLogEntry>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_train_log: cannot open " + path);
  for (const auto& e : log) {
    out << "{\"step\":" << e.step << ",\"stage\":\"" << e.stage
        << "\",\"lr\":" << format_double(e.lr)
        << ",\"train_loss\":" << format_double(e.train_loss);
    if (e.val_ppl >= 0.0) out << ",\"val_ppl\":" << format_double(e.val_ppl);
    out << "}\n";
  }
}

std::vector<TrainLogEntry> read_train_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_train_log: cannot open " + path);
  std::vector<TrainLogEntry> log;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    json j = json::parse(line);
    TrainLogEntry e;
    e.step = j.at("step").get<long>();
    e.stage = j.at("stage").get<std::string>();
    e.lr = j.at("lr").get<double>();
    e.train_loss = j.at("train_loss").get<double>();
    e.val_ppl = j.value("val_ppl", -1.0);
    log.push_back(e);
  }
  return log;
}

// ---- shared helpers -------------------------------------------------------

namespace {

std::vector<std::string> corpus_texts(const std::vector<CorpusRecord>& records) {
  std::vector<std::string> texts;
  for (const auto& r : records) texts.push_back(r.text);
  return texts;
}

std::vector<Document> encode_records(const std::vector<CorpusRecord>& records,
                                     const Vocab& vocab, const BpeMerges& merges) {
  return encode_corpus(corpus_texts(records), vocab, merges);
}

std::vector<LabeledDocument> load_labeled(const std::string& path, const Vocab& vocab,
                                          const BpeMerges& merges, bool require_labels) {
  std::vector<LabeledDocument> docs;
  for (const auto& r : read_corpus(path)) {
    if (require_labels && !r.labels)
      throw std::runtime_error("corpus record " + r.id + " has no labels; run `label` first");
    for (auto& d : to_labeled_documents(r, vocab, merges)) docs.push_back(std::move(d));
  }
  return docs;
}

struct RougeTriple {
  double r1 = 0.0, r2 = 0.0, rl = 0.0;
};

RougeTriple corpus_rouge(const std::vector<LabeledDocument>& docs,
                         const std::vector<std::vector<long>>& chosen) {
  RougeTriple t;
  for (size_t i = 0; i < docs.size(); ++i) {
    TokenSeq cand, ref;
    for (long s : chosen[i])
      for (int id : docs[i].doc.sentences[static_cast<size_t>(s)])
        if (id != Vocab::kEos) cand.push_back(id);
    for (const auto& sent : docs[i].reference)
      for (int id : sent)
        if (id != Vocab::kEos) ref.push_back(id);
    t.r1 += rouge_n(cand, ref, 1).f1;
    t.r2 += rouge_n(cand, ref, 2).f1;
    t.rl += rouge_l(cand, ref).f1;
  }
  double n = docs.empty() ? 1.0 : static_cast<double>(docs.size());
  t.r1 /= n;
  t.r2 /= n;
  t.rl /= n;
  return t;
}

}  // namespace

// ---- build-vocab ----------------------------------------------------------

int cmd_build_vocab(const BuildVocabArgs& args) {
  if (args.num_merges < 0) throw std::runtime_error("build-vocab: num_merges must be >= 0");
  auto records = read_corpus(args.corpus_path);
  auto counts = count_words(corpus_texts(records));
  BpeMerges merges = bpe_train(counts, args.num_merges);
  Vocab vocab = build_vocab(counts, merges);
  merges.save(args.merges_out);
  vocab.save(args.vocab_out);
  std::cout << "vocab size: " << vocab.size() << "\n";
  return 0;
}

// ---- pretrain -------------------------------------------------------------

int cmd_pretrain(const PretrainArgs& args) {
  Vocab vocab = Vocab::load(args.vocab_path);
  BpeMerges merges = BpeMerges::load(args.merges_path);
  if (args.stage_corpora.empty()) throw std::runtime_error("pretrain: no stage corpora given");

  std::vector<PretrainStage> stages;
  std::vector<Document> shared_valid;
  if (!args.valid_path.empty())
    shared_valid = encode_records(read_corpus(args.valid_path), vocab, merges);
  for (size_t i = 0; i < args.stage_corpora.size(); ++i) {
    PretrainStage stage;
    stage.name = "stage" + std::to_string(i + 1);
    stage.train = encode_records(read_corpus(args.stage_corpora[i]), vocab, merges);
    stage.valid = args.valid_path.empty() ? stage.train : shared_valid;
    stages.push_back(std::move(stage));
  }

  ModelConfig model = args.model;
  model.vocab_size = vocab.size();
  model.validate();

  ModelParams params;
  AdamState adam;
  TrainerState state;
  PretrainOptions options = args.options;
  if (!args.init_checkpoint.empty()) {
    Checkpoint ckpt = load_checkpoint(args.init_checkpoint, model);
    params = ckpt.params;
    adam = ckpt.adam;
    state = ckpt.trainer;
    options.seed = ckpt.seed;
  } else {
    Rng init_rng(options.seed);
    params = ModelParams::init(model, init_rng);
  }

  fs::create_directories(args.out_dir);
  std::string final_path = args.out_dir + "/pretrain.ckpt";

  StepHook hook = [&](const TrainerState& st, const TrainLogEntry&) {
    if (args.checkpoint_every > 0 && st.step % args.checkpoint_every == 0)
      save_checkpoint(final_path, params, adam, st, options.seed);
    if (args.stop_after_step > 0 && st.step >= args.stop_after_step) {
      save_checkpoint(final_path, params, adam, st, options.seed);
      return false;
    }
    return true;
  };
  StageHook stage_end = [&](long stage_index, const std::string&) {
    save_checkpoint(args.out_dir + "/pretrain-stage" + std::to_string(stage_index + 1) + ".ckpt",
                    params, adam, state, options.seed);
  };

  PretrainResult result = pretrain_run(params, adam, state, stages, options, hook, stage_end);
  write_train_log(args.out_dir + "/pretrain.log", result.log);
  if (!result.interrupted) save_checkpoint(final_path, params, adam, state, options.seed);
  std::cout << "pretrain: " << (result.interrupted ? "interrupted at" : "finished at") << " step "
            << state.step << "\n";
  return 0;
}

// ---- finetune -------------------------------------------------------------

int cmd_finetune(const FinetuneArgs& args) {
  Vocab vocab = Vocab::load(args.vocab_path);
  BpeMerges merges = BpeMerges::load(args.merges_path);
  auto train = load_labeled(args.train_path, vocab, merges, true);
  std::vector<LabeledDocument> valid;
  if (!args.valid_path.empty()) valid = load_labeled(args.valid_path, vocab, merges, true);

  ModelConfig model = args.model;
  model.vocab_size = vocab.size();
  model.validate();

  ModelParams params;
  if (!args.init_checkpoint.empty()) {
    params = load_checkpoint(args.init_checkpoint, model).params;
  } else {
    Rng init_rng(args.options.seed);
    params = ModelParams::init(model, init_rng);
  }

  fs::create_directories(args.out_dir);
  AdamState adam;
  FinetuneResult result = finetune(params, adam, train, valid, args.options);
  TrainerState state;
  state.step = result.final_step;
  save_checkpoint(args.out_dir + "/finetune.ckpt", params, adam, state, args.options.seed);
  write_train_log(args.out_dir + "/finetune.log", result.log);
  std::cout << "finetune: finished at step " << result.final_step << "\n";
  return 0;
}

// ---- label ----------------------------------------------------------------

int cmd_label(const LabelArgs& args) {
  Vocab vocab = Vocab::load(args.vocab_path);
  BpeMerges merges = BpeMerges::load(args.merges_path);
  auto records = read_corpus(args.corpus_path);

  std::vector<CorpusRecord> out;
  long skipped = 0;
  for (const auto& r : records) {
    if (!r.summary) {
      ++skipped;
      continue;
    }
    TokenSeq ref;
    for (const auto& sent : encode_sentences(*r.summary, vocab, merges))
      ref.insert(ref.end(), sent.begin(), sent.end());

    std::vector<bool> labels;
    double score = 0.0;
    long chunks = 0;
    for (const auto& doc : segment_document(encode_sentences(r.text, vocab, merges))) {
      std::vector<TokenSeq> sentences;
      for (const auto& s : doc.sentences) {
        TokenSeq t;
        for (int id : s)
          if (id != Vocab::kEos) t.push_back(id);
        sentences.push_back(std::move(t));
      }
      std::vector<bool> chunk_labels =
          ref.empty() ? std::vector<bool>(sentences.size(), false)
                      : oracle_labels_greedy(sentences, ref, args.max_selected);
      score += selection_score(sentences, chunk_labels, ref);
      labels.insert(labels.end(), chunk_labels.begin(), chunk_labels.end());
      ++chunks;
    }
    CorpusRecord labeled = r;
    labeled.labels = labels;
    labeled.oracle_score = chunks == 0 ? 0.0 : score / static_cast<double>(chunks);
    out.push_back(std::move(labeled));
  }
  write_corpus(args.out_path, out);
  if (skipped > 0) std::cerr << "label: skipped " << skipped << " records without summaries\n";
  std::cout << "label: wrote " << out.size() << " records\n";
  return 0;
}

// ---- evaluate -------------------------------------------------------------

int cmd_evaluate(const EvaluateArgs& args) {
  Vocab vocab = Vocab::load(args.vocab_path);
  BpeMerges merges = BpeMerges::load(args.merges_path);
  auto test = load_labeled(args.test_path, vocab, merges, false);
  for (const auto& d : test)
    if (d.reference.empty())
      throw std::runtime_error("evaluate: record " + d.id + " has no summary");

  Checkpoint ckpt = load_checkpoint(args.checkpoint_path);
  ModelParams params = ckpt.params;

  int k;
  if (args.k == "tune") {
    if (args.valid_path.empty())
      throw std::runtime_error("evaluate: k=tune requires a validation corpus");
    auto valid = load_labeled(args.valid_path, vocab, merges, false);
    std::vector<int> k_range{1, 2, 3, 4, 5};
    k = tune_k(params, valid, k_range);
  } else {
    k = static_cast<int>(std::stol(args.k));
    if (k < 1) throw std::runtime_error("evaluate: K must be >= 1");
  }

  RunContext ctx;
  std::vector<std::vector<long>> model_chosen, lead_chosen;
  std::vector<SummarySelection> selections;
  for (const auto& d : test) {
    SummarySelection sel = rank_and_select(classify_sentences(d.doc, params, ctx), k);
    model_chosen.push_back(sel.chosen);
    selections.push_back(std::move(sel));
    std::vector<long> lead;
    for (long i = 0; i < std::min<long>(k, static_cast<long>(d.doc.sentences.size())); ++i)
      lead.push_back(i);
    lead_chosen.push_back(std::move(lead));
  }
  RougeTriple m = corpus_rouge(test, model_chosen);
  RougeTriple lead = corpus_rouge(test, lead_chosen);

  fs::create_directories(args.out_dir);
  std::ostringstream report;
  report << "documents: " << test.size() << "\n";
  report << "k: " << k << "\n";
  report << "model_rouge1_f1: " << format_double(m.r1) << "\n";
  report << "model_rouge2_f1: " << format_double(m.r2) << "\n";
  report << "model_rougel_f1: " << format_double(m.rl) << "\n";
  report << "lead" << k << "_rouge1_f1: " << format_double(lead.r1) << "\n";
  report << "lead" << k << "_rouge2_f1: " << format_double(lead.r2) << "\n";
  report << "lead" << k << "_rougel_f1: " << format_double(lead.rl) << "\n";
  std::cout << report.str();
  std::ofstream out(args.out_dir + "/metrics.txt");
  if (!out) throw std::runtime_error("evaluate: cannot open " + args.out_dir + "/metrics.txt");
  out << report.str();

  std::ofstream summaries(args.out_dir + "/summaries.jsonl");
  for (size_t i = 0; i < test.size(); ++i) {
    std::vector<int> ids;
    for (long s : selections[i].chosen)
      for (int id : test[i].doc.sentences[static_cast<size_t>(s)]) ids.push_back(id);
    json j;
    j["doc_id"] = test[i].id;
    j["chosen_indices"] = selections[i].chosen;
    j["summary_text"] = render_ids(ids, vocab);
    summaries << j.dump() << "\n";
  }
  return 0;
}

}  // namespace hibert

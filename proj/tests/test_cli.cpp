#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "hibert/checkpoint.hpp"
#include "hibert/commands.hpp"
#include "hibert/corpus.hpp"

using namespace hibert;
namespace fs = std::filesystem;

namespace {

const fs::path kScratch = fs::temp_directory_path() / "hibert_cli_test";

std::string path(const std::string& name) { return (kScratch / name).string(); }

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ScratchDir {
  ScratchDir() {
    fs::remove_all(kScratch);
    fs::create_directories(kScratch);
  }
};

void write_toy_corpus(const std::string& p, bool with_summary) {
  std::vector<CorpusRecord> records;
  const char* texts[] = {
      "The cat sat on the mat. Dogs bark loudly at night. Fish swim in the sea.",
      "Birds can fly very far. The cat sat on the mat. Rain falls on the hills.",
      "Dogs bark loudly at night. Fish swim in the sea. Birds can fly very far.",
  };
  const char* summaries[] = {
      "Dogs bark loudly at night.",
      "The cat sat on the mat.",
      "Birds can fly very far.",
  };
  for (int i = 0; i < 3; ++i) {
    CorpusRecord r;
    r.id = "doc-" + std::to_string(i);
    r.text = texts[i];
    if (with_summary) r.summary = summaries[i];
    records.push_back(r);
  }
  write_corpus(p, records);
}

void build_toy_vocab() {
  BuildVocabArgs a;
  a.corpus_path = path("corpus.jsonl");
  a.num_merges = 60;
  a.vocab_out = path("vocab.txt");
  a.merges_out = path("merges.txt");
  cmd_build_vocab(a);
}

}  // namespace

TEST_CASE("cli pipeline") {
  ScratchDir scratch;
  write_toy_corpus(path("corpus.jsonl"), true);

  SUBCASE("build-vocab is deterministic and writes reserved tokens first") {
    build_toy_vocab();
    std::string vocab1 = slurp(path("vocab.txt"));
    CHECK(vocab1.rfind("<pad>\n<unk>\n<bos>\n<eos>\n[MASK]\n", 0) == 0);

    BuildVocabArgs again;
    again.corpus_path = path("corpus.jsonl");
    again.num_merges = 60;
    again.vocab_out = path("vocab2.txt");
    again.merges_out = path("merges2.txt");
    cmd_build_vocab(again);
    CHECK(slurp(path("vocab2.txt")) == vocab1);
    CHECK(slurp(path("merges2.txt")) == slurp(path("merges.txt")));
  }

  SUBCASE("checkpoint round-trip is byte-identical") {
    Rng rng(3);
    ModelParams params = ModelParams::init(testutil::small_config(23), rng);
    AdamState adam;
    TrainerState trainer;
    trainer.step = 17;
    trainer.best_ppl = 3.25;
    save_checkpoint(path("a.ckpt"), params, adam, trainer, 99);

    Checkpoint loaded = load_checkpoint(path("a.ckpt"));
    CHECK(loaded.seed == 99);
    CHECK(loaded.trainer.step == 17);
    CHECK(loaded.trainer.best_ppl == 3.25);
    save_checkpoint(path("b.ckpt"), loaded.params, loaded.adam, loaded.trainer, loaded.seed);
    CHECK(slurp(path("a.ckpt")) == slurp(path("b.ckpt")));

    ModelConfig other = testutil::small_config(24);
    CHECK_THROWS(load_checkpoint(path("a.ckpt"), other));
  }

  SUBCASE("label marks the copied sentence True") {
    build_toy_vocab();
    LabelArgs a;
    a.vocab_path = path("vocab.txt");
    a.merges_path = path("merges.txt");
    a.corpus_path = path("corpus.jsonl");
    a.out_path = path("labeled.jsonl");
    cmd_label(a);

    auto labeled = read_corpus(path("labeled.jsonl"));
    REQUIRE(labeled.size() == 3);
    std::vector<std::vector<bool>> expected{
        {false, true, false}, {false, true, false}, {false, false, true}};
    for (size_t i = 0; i < labeled.size(); ++i) {
      REQUIRE(labeled[i].labels);
      CHECK(*labeled[i].labels == expected[i]);
      REQUIRE(labeled[i].oracle_score);
      CHECK(*labeled[i].oracle_score > 0.9);
    }

    // deterministic output ordering: rerun and compare bytes
    a.out_path = path("labeled2.jsonl");
    cmd_label(a);
    CHECK(slurp(path("labeled2.jsonl")) == slurp(path("labeled.jsonl")));

    // empty corpus -> empty output, no error
    write_corpus(path("empty.jsonl"), {});
    a.corpus_path = path("empty.jsonl");
    a.out_path = path("empty_out.jsonl");
    CHECK(cmd_label(a) == 0);
    CHECK(read_corpus(path("empty_out.jsonl")).empty());
  }

  SUBCASE("pretrain validates before side effects") {
    build_toy_vocab();
    PretrainArgs a;
    a.vocab_path = path("vocab.txt");
    a.merges_path = path("merges.txt");
    a.out_dir = path("should_not_exist");
    CHECK_THROWS(cmd_pretrain(a));  // empty stage list
    CHECK_FALSE(fs::exists(path("should_not_exist")));
  }

  SUBCASE("evaluate with a uniform head reproduces the lead baseline") {
    build_toy_vocab();
    Vocab vocab = Vocab::load(path("vocab.txt"));
    Rng rng(4);
    ModelParams params = ModelParams::init(testutil::small_config(vocab.size()), rng);
    params.cls_w.data().setZero();
    params.cls_b.data().setZero();
    save_checkpoint(path("uniform.ckpt"), params, AdamState{}, TrainerState{}, 0);

    EvaluateArgs a;
    a.vocab_path = path("vocab.txt");
    a.merges_path = path("merges.txt");
    a.checkpoint_path = path("uniform.ckpt");
    a.test_path = path("corpus.jsonl");
    a.out_dir = path("eval_out");
    a.k = "2";
    cmd_evaluate(a);

    std::string report = slurp(path("eval_out/metrics.txt"));
    CHECK(report.find("documents: 3") != std::string::npos);
    CHECK(report.find("k: 2") != std::string::npos);
    // equal probabilities select the first K sentences: model rows == lead rows
    std::istringstream in(report);
    std::string line;
    std::vector<std::string> model_vals, lead_vals;
    while (std::getline(in, line)) {
      size_t colon = line.find(": ");
      if (line.rfind("model_", 0) == 0) model_vals.push_back(line.substr(colon + 2));
      if (line.rfind("lead", 0) == 0) lead_vals.push_back(line.substr(colon + 2));
    }
    REQUIRE(model_vals.size() == 3);
    CHECK(model_vals == lead_vals);
    CHECK(fs::exists(path("eval_out/summaries.jsonl")));
  }

  SUBCASE("config files and train logs") {
    {
      std::ofstream out(path("run.conf"));
      out << "# comment\n"
          << "lr = 0.002\n"
          << "warmup=30\n"
          << "model = tiny\n";
    }
    Config cfg = Config::from_file(path("run.conf"));
    CHECK(cfg.get_double("lr", 0) == 0.002);
    CHECK(cfg.get_long("warmup", 0) == 30);
    CHECK(cfg.get("model", "") == "tiny");
    CHECK(cfg.get("missing", "fallback") == "fallback");

    {
      std::ofstream out(path("bad.conf"));
      out << "no equals sign here\n";
    }
    CHECK_THROWS(Config::from_file(path("bad.conf")));

    std::vector<TrainLogEntry> log{{1, "stage1", 1e-4, 2.7315, -1.0},
                                   {2, "stage1", 2e-4, 2.25, 15.125}};
    write_train_log(path("train.log"), log);
    auto back = read_train_log(path("train.log"));
    REQUIRE(back.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
      CHECK(back[i].step == log[i].step);
      CHECK(back[i].stage == log[i].stage);
      CHECK(back[i].lr == log[i].lr);
      CHECK(back[i].train_loss == log[i].train_loss);
      CHECK(back[i].val_ppl == log[i].val_ppl);
    }
  }
}

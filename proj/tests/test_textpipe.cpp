#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "hibert/rng.hpp"
#include "hibert/textpipe.hpp"

using namespace hibert;

TEST_CASE("tokenize") {
  auto sents = tokenize("He died in 1616. He wrote.");
  REQUIRE(sents.size() == 2);
  CHECK(sents[0] == std::vector<std::string>{"he", "died", "in", "1616", "."});
  CHECK(sents[1] == std::vector<std::string>{"he", "wrote", "."});

  CHECK(tokenize("").empty());

  auto one = tokenize("Hello");
  REQUIRE(one.size() == 1);
  CHECK(one[0] == std::vector<std::string>{"hello"});

  // period not followed by an uppercase start does not split
  auto abbrev = tokenize("It cost 3. 50 dollars");
  CHECK(abbrev.size() == 1);

  // no uppercase follows "?!", so the quote stays in the same sentence
  auto punct = tokenize("Really?! \"yes,\" he said.");
  REQUIRE(punct.size() == 1);
  CHECK(punct[0] == std::vector<std::string>{"really", "?", "!", "\"", "yes", ",", "\"", "he",
                                             "said", "."});
}

TEST_CASE("bpe training and encoding") {
  std::map<std::string, long> aaab{{"aaab", 5}};
  BpeMerges one = bpe_train(aaab, 1);
  REQUIRE(one.rules.size() == 1);
  CHECK(one.rules[0] == std::make_pair(std::string("a"), std::string("a")));

  CHECK(bpe_train(aaab, 0).rules.empty());
  CHECK(bpe_encode("cat", BpeMerges{}) == std::vector<std::string>{"c", "a", "t</w>"});

  // single-char words: only the end-of-word attachment merge space exists
  std::map<std::string, long> chars{{"a", 3}, {"b", 2}};
  CHECK(bpe_train(chars, 5).rules.empty());

  std::map<std::string, long> low{{"low", 10}};
  BpeMerges merges = bpe_train(low, 2);
  CHECK(bpe_encode("low", merges) == std::vector<std::string>{"low</w>"});

  // roundtrip property
  Rng rng(7);
  std::vector<std::string> words{"summarization", "hierarchical", "xylophone", "a", "1616"};
  std::map<std::string, long> counts;
  for (const auto& w : words) counts[w] = 1 + static_cast<long>(rng.below(9));
  for (int m : {0, 3, 10, 40}) {
    BpeMerges mg = bpe_train(counts, m);
    for (const auto& w : words) CHECK(bpe_decode(bpe_encode(w, mg)) == w);
  }
}

TEST_CASE("segment_document") {
  std::vector<std::vector<int>> sixty_five(65, std::vector<int>{5, 6});
  auto docs = segment_document(sixty_five);
  REQUIRE(docs.size() == 3);
  CHECK(docs[0].sentences.size() == 30);
  CHECK(docs[1].sentences.size() == 30);
  CHECK(docs[2].sentences.size() == 5);

  std::vector<int> eighty(80, 5);
  auto one = segment_document({eighty});
  REQUIRE(one.size() == 1);
  REQUIRE(one[0].sentences.size() == 1);
  CHECK(one[0].sentences[0].size() == 51);
  CHECK(one[0].sentences[0].back() == Vocab::kEos);

  auto exact = segment_document(std::vector<std::vector<int>>(30, {5}));
  CHECK(exact.size() == 1);

  // empty sentences dropped, order preserved
  auto kept = segment_document({{7}, {}, {8}});
  REQUIRE(kept.size() == 1);
  REQUIRE(kept[0].sentences.size() == 2);
  CHECK(kept[0].sentences[0][0] == 7);
  CHECK(kept[0].sentences[1][0] == 8);

  for (const auto& d : docs) validate_document(d, 10);
  validate_document(one[0], 10);
}

TEST_CASE("vocab") {
  Vocab v;
  CHECK(v.size() == 5);
  CHECK(v.token_of(Vocab::kMask) == "[MASK]");
  int id = v.add("cat</w>");
  CHECK(v.add("cat</w>") == id);  // idempotent
  CHECK(v.id_of("dog</w>") == Vocab::kUnk);

  std::string path = (std::filesystem::temp_directory_path() / "hibert_vocab_test.txt").string();
  v.save(path);
  Vocab loaded = Vocab::load(path);
  CHECK(loaded.size() == v.size());
  CHECK(loaded.id_of("cat</w>") == id);
  std::remove(path.c_str());
}

TEST_CASE("encode_corpus") {
  std::vector<std::string> texts{"The cat sat. The dog ran."};
  auto counts = count_words(texts);
  BpeMerges merges = bpe_train(counts, 10);
  Vocab vocab = build_vocab(counts, merges);

  auto docs = encode_corpus(texts, vocab, merges);
  REQUIRE(docs.size() == 1);
  CHECK(docs[0].sentences.size() == 2);
  for (const auto& d : docs) validate_document(d, vocab.size());
  for (const auto& s : docs[0].sentences)
    for (int id : s) CHECK(id != Vocab::kUnk);

  // novel character maps to UNK
  auto unk = encode_corpus({"qqq\x01zzz"}, vocab, merges);
  bool saw_unk = false;
  for (const auto& d : unk)
    for (const auto& s : d.sentences)
      for (int id : s) saw_unk |= id == Vocab::kUnk;
  CHECK(saw_unk);

  // determinism
  auto again = encode_corpus(texts, vocab, merges);
  CHECK(again[0].sentences == docs[0].sentences);
}

TEST_CASE("validate_document rejects breakage") {
  Document ok;
  ok.sentences = {{5, Vocab::kEos}};
  validate_document(ok, 10);

  Document no_eos;
  no_eos.sentences = {{5, 6}};
  CHECK_THROWS(validate_document(no_eos, 10));

  Document mid_eos;
  mid_eos.sentences = {{Vocab::kEos, 5, Vocab::kEos}};
  CHECK_THROWS(validate_document(mid_eos, 10));

  Document oor;
  oor.sentences = {{11, Vocab::kEos}};
  CHECK_THROWS(validate_document(oor, 10));

  Document empty;
  CHECK_THROWS(validate_document(empty, 10));

  Document long_sent;
  long_sent.sentences = {std::vector<int>(52, 5)};
  long_sent.sentences[0].back() = Vocab::kEos;
  CHECK_THROWS(validate_document(long_sent, 10));
}

#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace hibert {

/// Token/id bijection with fixed reserved ids at the front.
struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kMask = 4;

  Vocab();

  int add(const std::string& token);          // idempotent, returns id
  int id_of(const std::string& token) const;  // kUnk when absent
  const std::string& token_of(int id) const;
  int size() const { return static_cast<int>(id_to_token.size()); }

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, int> token_to_id;
};

/// Ordered BPE merge rules; earlier rules have priority.
struct BpeMerges {
  std::vector<std::pair<std::string, std::string>> rules;

  void save(const std::string& path) const;
  static BpeMerges load(const std::string& path);
};

/// Sentences of subword ids, each terminated by exactly one EOS.
struct Document {
  std::vector<std::vector<int>> sentences;
};

inline constexpr int kMaxSentenceTokens = 50;  // content tokens, EOS excluded
inline constexpr int kMaxDocumentSentences = 30;

/// Throws if the document violates its length/EOS/id-range invariants.
void validate_document(const Document& doc, int vocab_size);

/// Rule-based sentence splitting and word tokenization, lowercased.
/// Boundaries at . ! ? followed by whitespace and an uppercase letter, or at
/// end of text; punctuation is detached from word edges.
std::vector<std::vector<std::string>> tokenize(const std::string& text);

/// Classic BPE training over a word-frequency table. Ties between equally
/// frequent pairs break lexicographically.
BpeMerges bpe_train(const std::map<std::string, long>& word_counts, int num_merges);

/// Greedy application of merges in priority order; the word's last character
/// carries a "</w>" marker.
std::vector<std::string> bpe_encode(const std::string& token, const BpeMerges& merges);

/// Inverse of bpe_encode: concatenate subwords and strip the end marker.
std::string bpe_decode(const std::vector<std::string>& pieces);

/// Truncate sentences to 50 tokens, append EOS, drop empties, chunk into
/// documents of at most 30 sentences.
std::vector<Document> segment_document(const std::vector<std::vector<int>>& sentences);

/// tokenize -> bpe_encode -> id map (UNK fallback) -> segment, per text.
std::vector<Document> encode_corpus(const std::vector<std::string>& texts, const Vocab& vocab,
                                    const BpeMerges& merges);

/// Subword id lists for one text's sentences (no truncation/segmenting).
std::vector<std::vector<int>> encode_sentences(const std::string& text, const Vocab& vocab,
                                               const BpeMerges& merges);

/// Vocabulary over the subword inventory produced by `merges` on `word_counts`,
/// reserved tokens first, subwords in lexicographic order.
Vocab build_vocab(const std::map<std::string, long>& word_counts, const BpeMerges& merges);

/// Word-frequency table of a tokenized corpus.
std::map<std::string, long> count_words(const std::vector<std::string>& texts);

}  // namespace hibert

#include "hibert/textpipe.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <stdexcept>

namespace hibert {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> sentences;
  std::string current;
  size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    current.push_back(c);
    if (c == '.' || c == '!' || c == '?') {
      size_t j = i + 1;
      while (j < text.size() && is_space(text[j])) ++j;
      bool at_end = j == text.size();
      bool boundary = at_end || (j > i + 1 && is_upper(text[j]));
      if (boundary) {
        sentences.push_back(current);
        current.clear();
        i = j;
        continue;
      }
    }
    ++i;
  }
  if (current.find_first_not_of(" \t\r\n") != std::string::npos) sentences.push_back(current);
  return sentences;
}

std::vector<std::string> word_tokenize(const std::string& sentence) {
  std::vector<std::string> tokens;
  size_t i = 0;
  while (i < sentence.size()) {
    while (i < sentence.size() && is_space(sentence[i])) ++i;
    size_t start = i;
    while (i < sentence.size() && !is_space(sentence[i])) ++i;
    if (i == start) continue;
    std::string raw = sentence.substr(start, i - start);
    // Detach leading and trailing punctuation, one token per character.
    size_t lo = 0, hi = raw.size();
    while (lo < hi && is_punct(raw[lo])) ++lo;
    while (hi > lo && is_punct(raw[hi - 1])) --hi;
    for (size_t k = 0; k < lo; ++k) tokens.push_back(std::string(1, raw[k]));
    if (hi > lo) tokens.push_back(lower(raw.substr(lo, hi - lo)));
    for (size_t k = hi; k < raw.size(); ++k) tokens.push_back(std::string(1, raw[k]));
  }
  return tokens;
}

}  // namespace

std::vector<std::vector<std::string>> tokenize(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  for (const std::string& s : split_sentences(text)) {
    std::vector<std::string> toks = word_tokenize(s);
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  return out;
}

// ---- vocab ----------------------------------------------------------------

Vocab::Vocab() {
  for (const char* t : {"<pad>", "<unk>", "<bos>", "<eos>", "[MASK]"}) add(t);
}

int Vocab::add(const std::string& token) {
  auto it = token_to_id.find(token);
  if (it != token_to_id.end()) return it->second;
  int id = size();
  id_to_token.push_back(token);
  token_to_id.emplace(token, id);
  return id;
}

int Vocab::id_of(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? kUnk : it->second;
}

const std::string& Vocab::token_of(int id) const {
  if (id < 0 || id >= size())
    throw std::out_of_range("Vocab: id " + std::to_string(id) + " out of range");
  return id_to_token[static_cast<size_t>(id)];
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("Vocab::save: cannot open " + path);
  for (const auto& t : id_to_token) out << t << '\n';
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("Vocab::load: cannot open " + path);
  Vocab v;
  std::string line;
  int id = 0;
  while (std::getline(in, line)) {
    if (id < v.size()) {
      if (line != v.id_to_token[static_cast<size_t>(id)])
        throw std::runtime_error("Vocab::load: reserved token mismatch at line " +
                                 std::to_string(id));
    } else {
      v.add(line);
    }
    ++id;
  }
  return v;
}

// ---- BPE ------------------------------------------------------------------

void BpeMerges::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("BpeMerges::save: cannot open " + path);
  for (const auto& [a, b] : rules) out << a << ' ' << b << '\n';
}

BpeMerges BpeMerges::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("BpeMerges::load: cannot open " + path);
  BpeMerges m;
  std::string line;
  while (std::getline(in, line)) {
    size_t sp = line.find(' ');
    if (sp == std::string::npos) continue;
    m.rules.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  return m;
}

namespace {

std::vector<std::string> word_symbols(const std::string& word) {
  std::vector<std::string> syms;
  for (char c : word) syms.push_back(std::string(1, c));
  if (!syms.empty()) syms.back() += "</w>";
  return syms;
}

void apply_merge(std::vector<std::string>& syms, const std::string& a, const std::string& b) {
  size_t w = 0;
  for (size_t i = 0; i < syms.size();) {
    if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
      syms[w++] = a + b;
      i += 2;
    } else {
      if (w != i) syms[w] = std::move(syms[i]);
      ++w;
      ++i;
    }
  }
  syms.resize(w);
}

}  // namespace

BpeMerges bpe_train(const std::map<std::string, long>& word_counts, int num_merges) {
  if (num_merges < 0) throw std::invalid_argument("bpe_train: num_merges must be >= 0");
  std::vector<std::pair<std::vector<std::string>, long>> words;
  for (const auto& [w, c] : word_counts)
    if (!w.empty()) words.emplace_back(word_symbols(w), c);

  BpeMerges merges;
  for (int step = 0; step < num_merges; ++step) {
    std::map<std::pair<std::string, std::string>, long> pair_counts;
    for (const auto& [syms, count] : words)
      for (size_t i = 0; i + 1 < syms.size(); ++i)
        pair_counts[{syms[i], syms[i + 1]}] += count;
    if (pair_counts.empty()) break;
    // Highest count wins; the map's lexicographic order breaks ties.
    auto best = pair_counts.begin();
    for (auto it = pair_counts.begin(); it != pair_counts.end(); ++it)
      if (it->second > best->second) best = it;
    merges.rules.push_back(best->first);
    for (auto& [syms, count] : words) apply_merge(syms, best->first.first, best->first.second);
  }
  return merges;
}

std::vector<std::string> bpe_encode(const std::string& token, const BpeMerges& merges) {
  std::vector<std::string> syms = word_symbols(token);
  for (const auto& [a, b] : merges.rules) {
    if (syms.size() < 2) break;
    apply_merge(syms, a, b);
  }
  return syms;
}

std::string bpe_decode(const std::vector<std::string>& pieces) {
  std::string out;
  for (const auto& p : pieces) out += p;
  const std::string marker = "</w>";
  size_t pos = out.rfind(marker);
  if (pos != std::string::npos && pos + marker.size() == out.size()) out.erase(pos);
  return out;
}

// ---- documents ------------------------------------------------------------

void validate_document(const Document& doc, int vocab_size) {
  if (doc.sentences.empty() ||
      doc.sentences.size() > static_cast<size_t>(kMaxDocumentSentences))
    throw std::runtime_error("Document: sentence count " +
                             std::to_string(doc.sentences.size()) + " out of [1,30]");
  for (const auto& s : doc.sentences) {
    if (s.empty() || s.size() > static_cast<size_t>(kMaxSentenceTokens + 1))
      throw std::runtime_error("Document: sentence length " + std::to_string(s.size()) +
                               " out of [1,51]");
    if (s.back() != Vocab::kEos) throw std::runtime_error("Document: sentence lacks final EOS");
    for (size_t i = 0; i + 1 < s.size(); ++i)
      if (s[i] == Vocab::kEos) throw std::runtime_error("Document: interior EOS");
    for (int id : s)
      if (id < 0 || id >= vocab_size)
        throw std::runtime_error("Document: id " + std::to_string(id) +
                                 " outside vocabulary of size " + std::to_string(vocab_size));
  }
}

std::vector<Document> segment_document(const std::vector<std::vector<int>>& sentences) {
  std::vector<Document> docs;
  Document current;
  for (const auto& sent : sentences) {
    if (sent.empty()) continue;
    std::vector<int> s(sent.begin(),
                       sent.begin() + std::min<size_t>(sent.size(), kMaxSentenceTokens));
    s.push_back(Vocab::kEos);
    current.sentences.push_back(std::move(s));
    if (current.sentences.size() == static_cast<size_t>(kMaxDocumentSentences)) {
      docs.push_back(std::move(current));
      current = Document{};
    }
  }
  if (!current.sentences.empty()) docs.push_back(std::move(current));
  return docs;
}

std::vector<std::vector<int>> encode_sentences(const std::string& text, const Vocab& vocab,
                                               const BpeMerges& merges) {
  std::vector<std::vector<int>> out;
  for (const auto& sent : tokenize(text)) {
    std::vector<int> ids;
    for (const auto& word : sent)
      for (const auto& piece : bpe_encode(word, merges)) ids.push_back(vocab.id_of(piece));
    out.push_back(std::move(ids));
  }
  return out;
}

std::vector<Document> encode_corpus(const std::vector<std::string>& texts, const Vocab& vocab,
                                    const BpeMerges& merges) {
  std::vector<Document> docs;
  for (const auto& text : texts) {
    auto chunks = segment_document(encode_sentences(text, vocab, merges));
    for (auto& d : chunks) docs.push_back(std::move(d));
  }
  return docs;
}

std::map<std::string, long> count_words(const std::vector<std::string>& texts) {
  std::map<std::string, long> counts;
  for (const auto& text : texts)
    for (const auto& sent : tokenize(text))
      for (const auto& tok : sent) counts[tok] += 1;
  return counts;
}

Vocab build_vocab(const std::map<std::string, long>& word_counts, const BpeMerges& merges) {
  std::set<std::string> pieces;
  for (const auto& [word, count] : word_counts)
    for (const auto& p : bpe_encode(word, merges)) pieces.insert(p);
  Vocab v;
  for (const auto& p : pieces) v.add(p);
  return v;
}

}  // namespace hibert

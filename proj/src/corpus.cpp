#include "hibert/corpus.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace hibert {

using nlohmann::json;

std::vector<CorpusRecord> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_corpus: cannot open " + path);
  std::vector<CorpusRecord> records;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("read_corpus: " + path + ":" + std::to_string(line_no) + ": " +
                               e.what());
    }
    CorpusRecord r;
    r.id = j.value("id", "doc-" + std::to_string(records.size()));
    if (!j.contains("text"))
      throw std::runtime_error("read_corpus: " + path + ":" + std::to_string(line_no) +
                               ": missing text field");
    r.text = j.at("text").get<std::string>();
    if (j.contains("summary")) r.summary = j.at("summary").get<std::string>();
    if (j.contains("labels")) r.labels = j.at("labels").get<std::vector<bool>>();
    if (j.contains("oracle_score")) r.oracle_score = j.at("oracle_score").get<double>();
    records.push_back(std::move(r));
  }
  return records;
}

void write_corpus(const std::string& path, const std::vector<CorpusRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_corpus: cannot open " + path);
  for (const auto& r : records) {
    json j;
    j["id"] = r.id;
    j["text"] = r.text;
    if (r.summary) j["summary"] = *r.summary;
    if (r.labels) j["labels"] = *r.labels;
    if (r.oracle_score) j["oracle_score"] = *r.oracle_score;
    out << j.dump() << '\n';
  }
}

std::vector<LabeledDocument> to_labeled_documents(const CorpusRecord& record, const Vocab& vocab,
                                                  const BpeMerges& merges) {
  std::vector<Document> chunks = segment_document(encode_sentences(record.text, vocab, merges));
  std::vector<std::vector<int>> reference;
  if (record.summary) reference = encode_sentences(*record.summary, vocab, merges);

  std::vector<LabeledDocument> out;
  size_t label_pos = 0;
  for (size_t c = 0; c < chunks.size(); ++c) {
    LabeledDocument d;
    d.id = chunks.size() == 1 ? record.id : record.id + "#" + std::to_string(c);
    d.doc = chunks[c];
    d.reference = reference;
    if (record.labels) {
      size_t n = d.doc.sentences.size();
      if (label_pos + n > record.labels->size())
        throw std::runtime_error("to_labeled_documents: label count mismatch for " + record.id);
      d.labels.assign(record.labels->begin() + static_cast<long>(label_pos),
                      record.labels->begin() + static_cast<long>(label_pos + n));
      label_pos += n;
    }
    out.push_back(std::move(d));
  }
  if (record.labels && label_pos != record.labels->size())
    throw std::runtime_error("to_labeled_documents: label count mismatch for " + record.id);
  return out;
}

std::string render_ids(const std::vector<int>& ids, const Vocab& vocab) {
  const std::string marker = "</w>";
  std::vector<std::string> words;
  std::string current;
  for (int id : ids) {
    if (id == Vocab::kEos || id == Vocab::kBos || id == Vocab::kPad) continue;
    const std::string& piece = vocab.token_of(id);
    if (piece.size() >= marker.size() &&
        piece.compare(piece.size() - marker.size(), marker.size(), marker) == 0) {
      current += piece.substr(0, piece.size() - marker.size());
      words.push_back(current);
      current.clear();
    } else if (id < 5) {  // reserved tokens stand alone
      if (!current.empty()) {
        words.push_back(current);
        current.clear();
      }
      words.push_back(piece);
    } else {
      current += piece;
    }
  }
  if (!current.empty()) words.push_back(current);
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

}  // namespace hibert

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hibert/summarizer.hpp"
#include "hibert/textpipe.hpp"

namespace hibert {

/// One line of a line-delimited corpus file.
struct CorpusRecord {
  std::string id;
  std::string text;
  std::optional<std::string> summary;
  std::optional<std::vector<bool>> labels;        // present in labeled corpora
  std::optional<double> oracle_score;
};

std::vector<CorpusRecord> read_corpus(const std::string& path);
void write_corpus(const std::string& path, const std::vector<CorpusRecord>& records);

/// Encode a labeled record into per-chunk LabeledDocuments (a text longer than
/// 30 sentences yields several, ids suffixed "#<chunk>").
std::vector<LabeledDocument> to_labeled_documents(const CorpusRecord& record, const Vocab& vocab,
                                                  const BpeMerges& merges);

/// Render subword ids back to text (marker-aware join, EOS dropped).
std::string render_ids(const std::vector<int>& ids, const Vocab& vocab);

}  // namespace hibert

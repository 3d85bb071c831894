#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace frameind {

enum class ArgType : std::uint8_t { kSubj = 0, kObj = 1, kPrep = 2 };
inline constexpr int kNumArgTypes = 3;

// Collapses a Stanford-style dependency label into SUBJ / OBJ / PREP.
// Passive subjects are logical objects; anything unrecognised is PREP.
ArgType arg_type_from_dep(std::string_view dep_label);
std::string_view arg_type_name(ArgType type);
std::optional<ArgType> parse_arg_type(std::string_view name);

std::string make_caseframe(std::string_view event_head, std::string_view dep_label);

struct ArgumentRecord {
  ArgType arg_type = ArgType::kPrep;
  std::string head_lemma;
  std::string dep_label;
  std::string caseframe;
};

struct ClauseRecord {
  std::string doc_id;
  int sentence_index = 0;
  int clause_index = 0;
  std::string event_head_lemma;
  std::vector<ArgumentRecord> args;
};

struct Document {
  std::string doc_id;
  std::vector<ClauseRecord> clauses;
};

struct Corpus {
  std::vector<Document> documents;

  std::size_t num_clauses() const;
  std::size_t num_args() const;
};

// Reads line-delimited JSON clause records. Documents keep the order in which
// their first record appears; clauses are sorted by (sentence_index,
// clause_index) and must then be numbered 0..l-1.
Corpus load_corpus(const std::string& path);
Corpus parse_corpus(std::istream& in, const std::string& source = "<stream>");

void write_corpus(std::ostream& out, const Corpus& corpus);
std::string clause_to_json_line(const ClauseRecord& clause);

// String <-> dense id map. Id 0 is always the reserved UNK entry.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  int id(std::string_view word) const;
  const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }
  std::uint64_t count(int id) const { return counts_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(words_.size()); }
  bool contains(std::string_view word) const;

  // Appends a word; used while building and when reading model files.
  int add(const std::string& word, std::uint64_t count);
  void set_unk_count(std::uint64_t count) { counts_[kUnk] = count; }

  bool operator==(const Vocabulary& other) const {
    return words_ == other.words_ && counts_ == other.counts_;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, int> index_;
};

struct Vocabularies {
  Vocabulary event_heads;
  Vocabulary arg_heads;
  Vocabulary caseframes;

  bool operator==(const Vocabularies&) const = default;
};

// Types seen at least min_count times get ids ordered by descending frequency,
// ties broken lexicographically. Everything else folds into UNK.
Vocabularies build_vocab(const Corpus& corpus, std::uint64_t min_count);

struct IndexedArg {
  ArgType type = ArgType::kPrep;
  int head = 0;
  int caseframe = 0;
};

struct IndexedClause {
  int head = 0;
  std::vector<IndexedArg> args;
};

struct IndexedDocument {
  std::string doc_id;
  std::vector<IndexedClause> clauses;
};

struct IndexedCorpus {
  std::vector<IndexedDocument> documents;
};

IndexedDocument index_document(const Document& doc, const Vocabularies& vocab);
IndexedCorpus index_corpus(const Corpus& corpus, const Vocabularies& vocab);

// Inverse of index_corpus for in-vocabulary items; UNK ids come back as "<unk>".
Corpus deindex_corpus(const IndexedCorpus& corpus, const Vocabularies& vocab);

}  // namespace frameind

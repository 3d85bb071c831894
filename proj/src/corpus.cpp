#include "frameind/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "frameind/error.hpp"
#include "json.hpp"

namespace frameind {

using nlohmann::json;

namespace {

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

}  // namespace

ArgType arg_type_from_dep(std::string_view dep) {
  if (dep == "nsubjpass" || dep == "csubjpass" || dep == "nsubj:pass" ||
      dep == "csubj:pass") {
    return ArgType::kObj;
  }
  if (starts_with(dep, "nsubj") || starts_with(dep, "csubj") || dep == "xsubj" ||
      dep == "agent") {
    return ArgType::kSubj;
  }
  if (dep == "dobj" || dep == "obj" || dep == "iobj") return ArgType::kObj;
  return ArgType::kPrep;
}

std::string_view arg_type_name(ArgType type) {
  switch (type) {
    case ArgType::kSubj: return "SUBJ";
    case ArgType::kObj: return "OBJ";
    case ArgType::kPrep: return "PREP";
  }
  return "PREP";
}

std::optional<ArgType> parse_arg_type(std::string_view name) {
  if (name == "SUBJ") return ArgType::kSubj;
  if (name == "OBJ") return ArgType::kObj;
  if (name == "PREP") return ArgType::kPrep;
  return std::nullopt;
}

std::string make_caseframe(std::string_view event_head, std::string_view dep_label) {
  std::string cf;
  cf.reserve(event_head.size() + dep_label.size() + 1);
  cf.append(event_head).push_back('>');
  cf.append(dep_label);
  return cf;
}

std::size_t Corpus::num_clauses() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.clauses.size();
  return n;
}

std::size_t Corpus::num_args() const {
  std::size_t n = 0;
  for (const auto& d : documents)
    for (const auto& c : d.clauses) n += c.args.size();
  return n;
}

namespace {

std::string require_string(const json& j, const char* key, const std::string& source,
                           std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(source, line, std::string("missing field '") + key + "'");
  if (!it->is_string())
    throw ParseError(source, line, std::string("field '") + key + "' must be a string");
  std::string v = it->get<std::string>();
  if (v.empty()) throw ParseError(source, line, std::string("field '") + key + "' is empty");
  return v;
}

int require_index(const json& j, const char* key, const std::string& source, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(source, line, std::string("missing field '") + key + "'");
  if (!it->is_number_integer() || it->get<long long>() < 0)
    throw ParseError(source, line,
                     std::string("field '") + key + "' must be a non-negative integer");
  return static_cast<int>(it->get<long long>());
}

ClauseRecord parse_clause(const std::string& text, const std::string& source,
                          std::size_t line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, line, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(source, line, "record must be a JSON object");

  ClauseRecord c;
  c.doc_id = require_string(j, "doc_id", source, line);
  c.sentence_index = require_index(j, "sentence_index", source, line);
  c.clause_index = require_index(j, "clause_index", source, line);
  c.event_head_lemma = require_string(j, "event_head_lemma", source, line);

  auto args = j.find("args");
  if (args == j.end()) return c;
  if (!args->is_array()) throw ParseError(source, line, "field 'args' must be an array");
  for (const auto& a : *args) {
    if (!a.is_object()) throw ParseError(source, line, "argument must be a JSON object");
    ArgumentRecord r;
    r.head_lemma = require_string(a, "head_lemma", source, line);
    r.dep_label = require_string(a, "dep_label", source, line);
    r.arg_type = arg_type_from_dep(r.dep_label);
    if (auto t = a.find("arg_type"); t != a.end() && !t->is_null()) {
      auto parsed = t->is_string() ? parse_arg_type(t->get<std::string>()) : std::nullopt;
      if (!parsed) throw ParseError(source, line, "arg_type must be SUBJ, OBJ or PREP");
      r.arg_type = *parsed;
    }
    r.caseframe = make_caseframe(c.event_head_lemma, r.dep_label);
    if (auto cf = a.find("caseframe"); cf != a.end() && !cf->is_null()) {
      if (!cf->is_string() || cf->get<std::string>() != r.caseframe)
        throw ParseError(source, line,
                         "caseframe must equal event_head_lemma + '>' + dep_label");
    }
    c.args.push_back(std::move(r));
  }
  return c;
}

}  // namespace

Corpus parse_corpus(std::istream& in, const std::string& source) {
  std::vector<Document> docs;
  std::unordered_map<std::string, std::size_t> doc_pos;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    ClauseRecord c = parse_clause(text, source, line);
    auto [it, fresh] = doc_pos.try_emplace(c.doc_id, docs.size());
    if (fresh) docs.push_back(Document{c.doc_id, {}});
    docs[it->second].clauses.push_back(std::move(c));
  }

  for (auto& d : docs) {
    std::set<int> seen;
    for (const auto& c : d.clauses) {
      if (!seen.insert(c.clause_index).second)
        throw IntegrityError("duplicate clause_index " + std::to_string(c.clause_index) +
                             " in document '" + d.doc_id + "'");
    }
    std::stable_sort(d.clauses.begin(), d.clauses.end(),
                     [](const ClauseRecord& a, const ClauseRecord& b) {
                       return std::tie(a.sentence_index, a.clause_index) <
                              std::tie(b.sentence_index, b.clause_index);
                     });
    for (std::size_t i = 0; i < d.clauses.size(); ++i) {
      if (d.clauses[i].clause_index != static_cast<int>(i))
        throw IntegrityError("document '" + d.doc_id +
                             "': clause indices must run 0..l-1 in sentence order");
    }
  }
  return Corpus{std::move(docs)};
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");
  return parse_corpus(in, path);
}

std::string clause_to_json_line(const ClauseRecord& c) {
  json args = json::array();
  for (const auto& a : c.args) {
    args.push_back({{"arg_type", std::string(arg_type_name(a.arg_type))},
                    {"head_lemma", a.head_lemma},
                    {"dep_label", a.dep_label}});
  }
  json j = {{"doc_id", c.doc_id},
            {"sentence_index", c.sentence_index},
            {"clause_index", c.clause_index},
            {"event_head_lemma", c.event_head_lemma},
            {"args", std::move(args)}};
  return j.dump();
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& d : corpus.documents)
    for (const auto& c : d.clauses) out << clause_to_json_line(c) << '\n';
}

Vocabulary::Vocabulary() {
  words_.emplace_back(kUnkToken);
  counts_.push_back(0);
  index_.emplace(std::string(kUnkToken), kUnk);
}

int Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.count(std::string(word)) > 0 && word != kUnkToken;
}

int Vocabulary::add(const std::string& word, std::uint64_t count) {
  auto [it, fresh] = index_.try_emplace(word, size());
  if (fresh) {
    words_.push_back(word);
    counts_.push_back(count);
  } else {
    counts_[static_cast<std::size_t>(it->second)] += count;
  }
  return it->second;
}

namespace {

Vocabulary vocab_from_counts(const std::map<std::string, std::uint64_t>& counts,
                             std::uint64_t min_count) {
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  std::uint64_t unk = 0;
  for (const auto& [w, n] : counts) {
    if (n >= min_count && w != Vocabulary::kUnkToken)
      kept.emplace_back(w, n);
    else
      unk += n;
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  v.set_unk_count(unk);
  for (const auto& [w, n] : kept) v.add(w, n);
  return v;
}

}  // namespace

Vocabularies build_vocab(const Corpus& corpus, std::uint64_t min_count) {
  std::map<std::string, std::uint64_t> heads, args, cfs;
  for (const auto& d : corpus.documents) {
    for (const auto& c : d.clauses) {
      ++heads[c.event_head_lemma];
      for (const auto& a : c.args) {
        ++args[a.head_lemma];
        ++cfs[a.caseframe];
      }
    }
  }
  return Vocabularies{vocab_from_counts(heads, min_count), vocab_from_counts(args, min_count),
                      vocab_from_counts(cfs, min_count)};
}

IndexedDocument index_document(const Document& doc, const Vocabularies& vocab) {
  IndexedDocument out;
  out.doc_id = doc.doc_id;
  out.clauses.reserve(doc.clauses.size());
  for (const auto& c : doc.clauses) {
    IndexedClause ic;
    ic.head = vocab.event_heads.id(c.event_head_lemma);
    ic.args.reserve(c.args.size());
    for (const auto& a : c.args)
      ic.args.push_back({a.arg_type, vocab.arg_heads.id(a.head_lemma),
                         vocab.caseframes.id(a.caseframe)});
    out.clauses.push_back(std::move(ic));
  }
  return out;
}

IndexedCorpus index_corpus(const Corpus& corpus, const Vocabularies& vocab) {
  IndexedCorpus out;
  out.documents.reserve(corpus.documents.size());
  for (const auto& d : corpus.documents) out.documents.push_back(index_document(d, vocab));
  return out;
}

Corpus deindex_corpus(const IndexedCorpus& corpus, const Vocabularies& vocab) {
  Corpus out;
  for (const auto& d : corpus.documents) {
    Document doc{d.doc_id, {}};
    for (std::size_t i = 0; i < d.clauses.size(); ++i) {
      const auto& ic = d.clauses[i];
      ClauseRecord c;
      c.doc_id = d.doc_id;
      c.clause_index = static_cast<int>(i);
      c.event_head_lemma = vocab.event_heads.word(ic.head);
      for (const auto& a : ic.args) {
        const std::string& cf = vocab.caseframes.word(a.caseframe);
        auto gt = cf.find('>');
        std::string dep = gt == std::string::npos ? cf : cf.substr(gt + 1);
        c.args.push_back({a.type, vocab.arg_heads.word(a.head), dep, cf});
      }
      doc.clauses.push_back(std::move(c));
    }
    out.documents.push_back(std::move(doc));
  }
  return out;
}

}  // namespace frameind

#include "frameind/extract.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

namespace frameind {

using nlohmann::json;

namespace {

void decode_one(const ChainModel& model, const Document& doc, const IndexedDocument& idoc,
                Assignment& out, std::vector<ExtractedEntity>& entities) {
  if (doc.clauses.size() != idoc.clauses.size())
    throw IntegrityError("document '" + doc.doc_id + "' does not match its indexed form");
  const auto& s = model.structure();
  const int bf = s.background_frame();
  out = model.viterbi(idoc);
  for (std::size_t i = 0; i < doc.clauses.size(); ++i) {
    const auto& ca = out.clauses[i];
    const bool bkg = ca.state.bkg == Bkg::kBkg;
    const int frame = bkg ? bf : ca.state.frame;
    const int event = bkg ? ca.background_event : ca.state.event;
    const auto& clause = doc.clauses[i];
    for (std::size_t j = 0; j < clause.args.size(); ++j) {
      ExtractedEntity e;
      e.doc_id = doc.doc_id;
      e.frame = frame;
      e.event = event;
      e.slot = ca.slots[j];
      e.head_lemma = clause.args[j].head_lemma;
      e.clause_index = clause.clause_index;
      e.arg_index = static_cast<int>(j);
      e.background = bkg;
      entities.push_back(std::move(e));
    }
  }
}

}  // namespace

DecodeResult decode_corpus(const ModelParams& params, const Corpus& corpus,
                           const IndexedCorpus& indexed, int workers) {
  const std::size_t n = corpus.documents.size();
  if (indexed.documents.size() != n)
    throw IntegrityError("corpus and indexed corpus differ in document count");
  const ChainModel model(params);
  std::vector<Assignment> assignments(n);
  std::vector<std::vector<ExtractedEntity>> per_doc(n);

  const std::size_t blocks = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(blocks);
  auto run = [&](std::size_t b) {
    try {
      for (std::size_t d = b * n / blocks; d < (b + 1) * n / blocks; ++d)
        decode_one(model, corpus.documents[d], indexed.documents[d], assignments[d], per_doc[d]);
    } catch (...) {
      errors[b] = std::current_exception();
    }
  };
  if (blocks == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t b = 0; b < blocks; ++b) threads.emplace_back(run, b);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  DecodeResult out;
  out.assignments = std::move(assignments);
  for (auto& v : per_doc) {
    for (auto& e : v) {
      if (!e.background) out.entities.push_back(e);
      out.all.push_back(std::move(e));
    }
  }
  return out;
}

DecodeResult decode_corpus(const Model& model, const Corpus& corpus, int workers) {
  return decode_corpus(model.params, corpus, index_corpus(corpus, model.vocab), workers);
}

void write_entities(std::ostream& out, const std::vector<ExtractedEntity>& entities) {
  for (const auto& e : entities) {
    json j = {{"doc_id", e.doc_id},
              {"frame", e.frame},
              {"event", e.event},
              {"slot", e.slot},
              {"head_lemma", e.head_lemma},
              {"clause_index", e.clause_index},
              {"arg_index", e.arg_index}};
    if (e.background) j["background"] = true;
    out << j.dump() << '\n';
  }
}

std::vector<ExtractedEntity> parse_entities(std::istream& in, const std::string& source) {
  std::vector<ExtractedEntity> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(text);
      ExtractedEntity e;
      e.doc_id = j.at("doc_id").get<std::string>();
      e.frame = j.at("frame").get<int>();
      e.event = j.at("event").get<int>();
      e.slot = j.at("slot").get<int>();
      e.head_lemma = j.at("head_lemma").get<std::string>();
      e.clause_index = j.at("clause_index").get<int>();
      e.arg_index = j.at("arg_index").get<int>();
      e.background = j.value("background", false);
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw ParseError(source, line, ex.what());
    }
  }
  return out;
}

std::vector<ExtractedEntity> load_entities(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open entity file '" + path + "'");
  return parse_entities(in, path);
}

WordProb frame_word_prob(const ModelParams& params, int frame, int word) {
  const auto& s = params.structure;
  if (frame < 0 || frame > s.num_frames()) throw std::out_of_range("frame id out of range");
  if (word < 0 || word >= params.sizes.event_heads) return {0.0, true};
  double sum = 0.0;
  const int n = s.num_events(frame);
  for (int e = 0; e < n; ++e) sum += params.event_head(s.event_id(frame, e))[static_cast<std::size_t>(word)];
  return {sum / n, false};
}

WordProb frame_word_prob(const Model& model, int frame, const std::string& word) {
  if (!model.vocab.event_heads.contains(word)) return {0.0, true};
  return frame_word_prob(model.params, frame, model.vocab.event_heads.id(word));
}

std::vector<double> frame_posterior(const ModelParams& params, int word) {
  const int F = params.structure.num_frames();
  std::vector<double> p(static_cast<std::size_t>(F));
  double z = 0.0;
  for (int f = 0; f < F; ++f) {
    p[static_cast<std::size_t>(f)] = frame_word_prob(params, f, word).prob;
    z += p[static_cast<std::size_t>(f)];
  }
  if (!(z > 0.0)) throw UndefinedPosteriorError("frame posterior undefined: no frame emits the word");
  for (auto& x : p) x /= z;
  return p;
}

std::vector<double> frame_posterior(const Model& model, const std::string& word) {
  if (!model.vocab.event_heads.contains(word))
    throw UndefinedPosteriorError("frame posterior undefined: '" + word + "' is out of vocabulary");
  return frame_posterior(model.params, model.vocab.event_heads.id(word));
}

bool classify_document(const Model& model, const Document& doc, int frame, double avg_threshold,
                       double trigger_threshold) {
  if (doc.clauses.empty()) return false;
  const auto& vocab = model.vocab.event_heads;
  double sum = 0.0;
  bool trigger = false;
  for (const auto& c : doc.clauses) {
    if (!vocab.contains(c.event_head_lemma)) continue;
    const int w = vocab.id(c.event_head_lemma);
    sum += frame_word_prob(model.params, frame, w).prob;
    if (trigger) continue;
    try {
      trigger = frame_posterior(model.params, w)[static_cast<std::size_t>(frame)] > trigger_threshold;
    } catch (const UndefinedPosteriorError&) {
    }
  }
  return sum / static_cast<double>(doc.clauses.size()) > avg_threshold && trigger;
}

std::vector<std::vector<int>> classify_corpus(const Model& model, const Corpus& corpus,
                                              double avg_threshold, double trigger_threshold) {
  std::vector<std::vector<int>> out;
  for (const auto& doc : corpus.documents) {
    std::vector<int> frames;
    for (int f = 0; f < model.params.structure.num_frames(); ++f)
      if (classify_document(model, doc, f, avg_threshold, trigger_threshold)) frames.push_back(f);
    out.push_back(std::move(frames));
  }
  return out;
}

namespace {

std::vector<WeightedWord> top_words(std::span<const double> row, const Vocabulary& vocab, int k) {
  std::vector<int> ids(row.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    return row[static_cast<std::size_t>(a)] > row[static_cast<std::size_t>(b)];
  });
  const auto n = std::min(ids.size(), static_cast<std::size_t>(k));
  std::vector<WeightedWord> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({vocab.word(ids[i]), row[static_cast<std::size_t>(ids[i])]});
  return out;
}

json words_json(const std::vector<WeightedWord>& ws) {
  json a = json::array();
  for (const auto& w : ws) a.push_back({{"word", w.word}, {"prob", w.prob}});
  return a;
}

void words_text(std::ostream& os, const std::vector<WeightedWord>& ws) {
  for (std::size_t i = 0; i < ws.size(); ++i)
    os << (i ? ", " : "") << ws[i].word << " (" << std::fixed << std::setprecision(4) << ws[i].prob
       << ")";
}

}  // namespace

FrameReport dump_frames(const Model& model, int top_k) {
  if (top_k < 1) throw std::invalid_argument("top_k must be at least 1");
  const auto& p = model.params;
  const auto& s = p.structure;
  FrameReport r;
  r.top_k = top_k;
  for (int f = 0; f <= s.num_frames(); ++f) {
    FrameSummary fs;
    fs.frame = f;
    fs.background = f == s.background_frame();
    for (int e = 0; e < s.num_events(f); ++e)
      fs.events.push_back({e, top_words(p.event_head(s.event_id(f, e)), model.vocab.event_heads, top_k)});
    for (int k = 0; k < s.num_slots(f); ++k) {
      const int id = s.slot_id(f, k);
      fs.slots.push_back({k, top_words(p.arg_head(id), model.vocab.arg_heads, top_k),
                          top_words(p.arg_dep(id), model.vocab.caseframes, top_k)});
    }
    r.frames.push_back(std::move(fs));
  }
  return r;
}

std::string FrameReport::to_text() const {
  std::ostringstream os;
  for (const auto& f : frames) {
    os << (f.background ? "Background frame" : "Frame " + std::to_string(f.frame)) << '\n';
    for (const auto& e : f.events) {
      os << "  Event " << e.event << ": ";
      words_text(os, e.heads);
      os << '\n';
    }
    for (const auto& sl : f.slots) {
      os << "  Slot " << sl.slot << ": ";
      words_text(os, sl.heads);
      os << "\n    caseframes: ";
      words_text(os, sl.caseframes);
      os << '\n';
    }
  }
  return os.str();
}

json FrameReport::to_json() const {
  json out = {{"top_k", top_k}, {"frames", json::array()}};
  for (const auto& f : frames) {
    json jf = {{"frame", f.frame}, {"background", f.background}, {"events", json::array()},
               {"slots", json::array()}};
    for (const auto& e : f.events) jf["events"].push_back({{"event", e.event}, {"heads", words_json(e.heads)}});
    for (const auto& sl : f.slots)
      jf["slots"].push_back({{"slot", sl.slot},
                             {"heads", words_json(sl.heads)},
                             {"caseframes", words_json(sl.caseframes)}});
    out["frames"].push_back(std::move(jf));
  }
  return out;
}

}  // namespace frameind

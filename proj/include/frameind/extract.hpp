#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "frameind/chain.hpp"
#include "frameind/corpus.hpp"
#include "frameind/error.hpp"
#include "frameind/params.hpp"
#include "json.hpp"

namespace frameind {

// One argument with its decoded slot. `slot` is local to `frame`; the pair
// (frame, slot) identifies the induced slot.
struct ExtractedEntity {
  std::string doc_id;
  int frame = 0;
  int event = 0;
  int slot = 0;
  std::string head_lemma;
  int clause_index = 0;
  int arg_index = 0;
  bool background = false;

  bool operator==(const ExtractedEntity&) const = default;
};

struct DecodeResult {
  std::vector<Assignment> assignments;       // one per document
  std::vector<ExtractedEntity> all;          // every argument, background flagged
  std::vector<ExtractedEntity> entities;     // content arguments only
};

// Viterbi per document. `indexed` must be index_corpus(corpus, vocab) for the
// model's vocabularies.
DecodeResult decode_corpus(const ModelParams& params, const Corpus& corpus,
                           const IndexedCorpus& indexed, int workers = 1);
DecodeResult decode_corpus(const Model& model, const Corpus& corpus, int workers = 1);

void write_entities(std::ostream& out, const std::vector<ExtractedEntity>& entities);
std::vector<ExtractedEntity> parse_entities(std::istream& in, const std::string& source = "<stream>");
std::vector<ExtractedEntity> load_entities(const std::string& path);

struct WordProb {
  double prob = 0.0;
  bool oov = false;
};

// Mean over the frame's events of P_E-HEAD(w|E).
WordProb frame_word_prob(const ModelParams& params, int frame, int word);
WordProb frame_word_prob(const Model& model, int frame, const std::string& word);

class UndefinedPosteriorError : public NumericError {
 public:
  using NumericError::NumericError;
};

// P(F|w) over content frames. Throws UndefinedPosteriorError when no content
// frame gives w positive probability.
std::vector<double> frame_posterior(const ModelParams& params, int word);
std::vector<double> frame_posterior(const Model& model, const std::string& word);

inline constexpr double kDefaultTriggerThreshold = 0.2;

// True iff the token-averaged P_F(w) over event heads exceeds avg_threshold
// and some event head has P(F|w) > trigger_threshold.
bool classify_document(const Model& model, const Document& doc, int frame, double avg_threshold,
                       double trigger_threshold = kDefaultTriggerThreshold);

// Frames each document is assigned to, in frame order.
std::vector<std::vector<int>> classify_corpus(const Model& model, const Corpus& corpus,
                                              double avg_threshold,
                                              double trigger_threshold = kDefaultTriggerThreshold);

struct WeightedWord {
  std::string word;
  double prob = 0.0;
};

struct EventReport {
  int event = 0;
  std::vector<WeightedWord> heads;
};

struct SlotReport {
  int slot = 0;
  std::vector<WeightedWord> heads;
  std::vector<WeightedWord> caseframes;
};

struct FrameSummary {
  int frame = 0;
  bool background = false;
  std::vector<EventReport> events;
  std::vector<SlotReport> slots;
};

struct FrameReport {
  int top_k = 0;
  std::vector<FrameSummary> frames;

  std::string to_text() const;
  nlohmann::json to_json() const;
};

// Top-k emissions per event and slot, descending by probability with ties in
// vocabulary order. Background frame last.
FrameReport dump_frames(const Model& model, int top_k);

}  // namespace frameind

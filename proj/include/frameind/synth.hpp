#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "frameind/chain.hpp"
#include "frameind/corpus.hpp"
#include "frameind/params.hpp"
#include "json.hpp"

namespace frameind {

struct PlantedConfig {
  int num_frames = 2;
  int events_per_frame = 2;
  int slots_per_frame = 3;
  int bkg_events = 1;
  int bkg_slots = 2;
  int words_per_event = 4;     // size of each event's preferred head block
  int words_per_slot = 4;      // same for argument heads and dependency tokens
  double sharpness = 0.9;      // mass on the preferred block
  double p_background = 0.1;
  double beta = 0.5;
};

// A sharp model whose emission rows put `sharpness` of their mass on blocks
// of the vocabulary that no other event or slot prefers. UNK has probability 0.
Model planted_model(const PlantedConfig& config);

struct SamplerConfig {
  int min_clauses = 2;
  int max_clauses = 8;
  int min_args = 0;
  int max_args = 3;
};

struct PlantedCorpus {
  Corpus corpus;
  IndexedCorpus indexed;            // ids under the generating vocabularies
  std::vector<Assignment> truth;    // log_joint = path score under `params`
  ModelParams params;
};

// Ancestral sampling from the generative story. Argument types are drawn
// uniformly; dependency labels are opaque tokens "d<k>" carrying the sampled
// caseframe id. Each document uses its own seed derived from `seed`.
PlantedCorpus sample_corpus(const Model& model, int n_docs, const SamplerConfig& config,
                            std::uint64_t seed);

void write_truth(std::ostream& out, const PlantedCorpus& planted);

// The planted model over the caseframes a reader derives from the sampled
// text ("<event head>><dep token>"). P(e>d | slot) = P(d | slot) / #heads, a
// factor shared by every slot, so decoding matches the planted model.
Model textual_model(const Model& planted);

struct RecoveryScore {
  double slot_precision = 0.0;
  double slot_recall = 0.0;
  double slot_f1 = 0.0;
  double slot_purity = 0.0;
  double event_f1 = 0.0;
  double event_purity = 0.0;

  nlohmann::json to_json() const;
};

// Maximum-weight one-to-one matching on a rows x cols weight matrix; returns
// the column for each row, or -1.
std::vector<int> hungarian_max(const std::vector<std::vector<double>>& weight);

// Content slot and event labels of `decoded` (under `decoded_structure`)
// against `truth`, after an optimal one-to-one label mapping.
RecoveryScore recovery_score(const std::vector<Assignment>& truth, const Structure& truth_structure,
                             const std::vector<Assignment>& decoded,
                             const Structure& decoded_structure);

}  // namespace frameind

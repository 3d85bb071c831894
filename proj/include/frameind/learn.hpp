#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "frameind/chain.hpp"
#include "frameind/corpus.hpp"
#include "frameind/params.hpp"
#include "json.hpp"

namespace frameind {

// Expected counts of one document, kept sparse so incremental EM can hold
// one per document.
struct SparseStats {
  std::array<std::vector<std::pair<std::uint32_t, double>>, kNumFamilies> entries;
  double log_likelihood = 0.0;

  void add(Family f, std::size_t flat_index, double value) {
    entries[static_cast<std::size_t>(f)].emplace_back(static_cast<std::uint32_t>(flat_index), value);
  }
  // Sorts and merges duplicate indices.
  void compact();
  // dst += sign * this
  void apply_to(SufficientStats& dst, double sign) const;
};

// Adds one document's expected counts to `stats`; returns log P(doc).
double e_step(const ChainModel& model, const IndexedDocument& doc, SufficientStats& stats);
double e_step(const ChainModel& model, const IndexedDocument& doc, SparseStats& stats);
SufficientStats e_step(const ModelParams& params, const IndexedDocument& doc);

// Full-corpus E-step. Documents are split into `workers` contiguous blocks
// whose partial stats are summed in block order.
SufficientStats corpus_e_step(const ModelParams& params, const IndexedCorpus& corpus,
                              int workers = 1);
double corpus_loglik(const ModelParams& params, const IndexedCorpus& corpus, int workers = 1);

struct EmResult {
  ModelParams params;
  // Penalized (log-likelihood + log-prior) objective of the parameters
  // entering each iteration, plus the final parameters as the last entry.
  std::vector<double> trace;
  std::vector<double> loglik;
};

EmResult batch_em(const ModelParams& params, const IndexedCorpus& corpus, int iterations,
                  int workers = 1);

// One batch pass to seed per-document stats, then iterations-1 passes that
// visit documents in a seeded random order, swapping each document's stats in
// the running total and re-estimating after every document.
EmResult incremental_em(const ModelParams& params, const IndexedCorpus& corpus, int iterations,
                        std::uint64_t seed);

// Events and slots: local index k splits into 2k and 2k+1.
struct SplitRecord {
  std::vector<int> split_events;  // per frame: number of parent events split
  std::vector<int> split_slots;
};

struct SplitResult {
  ModelParams params;
  SplitRecord record;
};

SplitResult split_all(const ModelParams& params, double perturb_eps, std::uint64_t seed);

enum class MergeKind { kEvent, kSlot };

struct MergeCandidate {
  MergeKind kind = MergeKind::kEvent;
  int frame = 0;
  std::pair<int, int> pair;             // local sibling ids
  std::pair<double, double> weights;    // relative frequencies, sum to 1
  double loss = 0.0;                    // estimated log-likelihood decrease

  bool operator==(const MergeCandidate&) const = default;
};

enum class MergeScoring { kApproximate, kExact };

// All sibling pairs from `record`, ascending by loss (ties keep event-before-
// slot, frame, pair order).
std::vector<MergeCandidate> score_merges(const ModelParams& params, const SplitRecord& record,
                                         const IndexedCorpus& corpus,
                                         MergeScoring mode = MergeScoring::kApproximate,
                                         int workers = 1);

// Merges the given disjoint pairs.
ModelParams merge_pairs(const ModelParams& params, const std::vector<MergeCandidate>& pairs);

// Merges the ceil(fraction * n) lowest-loss candidates.
ModelParams merge_back(const ModelParams& params, const std::vector<MergeCandidate>& candidates,
                       double merge_fraction);

enum class EmMode { kBatch, kIncremental };

struct TrainSchedule {
  int cycles = 4;
  int em_iters_per_cycle = 10;
  int post_merge_iters = 5;
  double merge_fraction = 0.5;
  double perturb_eps = 0.01;
  EmMode mode = EmMode::kIncremental;
  MergeScoring merge_scoring = MergeScoring::kApproximate;
  std::uint64_t seed = 1;
  double init_jitter = 0.01;
  int workers = 1;
};

struct TrainStage {
  int cycle = 0;
  std::string stage;
  double loglik = 0.0;
  double penalized = 0.0;
  std::vector<int> events_per_frame;
  std::vector<int> slots_per_frame;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<TrainStage> stages;
  nlohmann::json to_json(bool with_timing) const;
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

// init -> cycles x [EM -> split -> EM -> score -> merge -> post-merge EM],
// with no split on the last cycle. Smoothing is halved at every split.
TrainResult train(const Structure& initial, const VocabSizes& sizes, const IndexedCorpus& corpus,
                  const TrainSchedule& schedule, double beta = 0.5,
                  const Smoothing& alpha = Smoothing());

}  // namespace frameind

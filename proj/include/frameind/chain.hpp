#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "frameind/corpus.hpp"
#include "frameind/params.hpp"

namespace frameind {

enum class Bkg : std::uint8_t { kCnt = 0, kBkg = 1 };

// Hidden label of one clause. For BKG states (frame, event) is the nominal
// content state frozen from the preceding clause.
struct CollapsedState {
  int frame = 0;
  int event = 0;  // local index within `frame`
  Bkg bkg = Bkg::kCnt;

  bool operator==(const CollapsedState&) const = default;
};

// Collapsed states are numbered [CNT copies of the content events | BKG copies].
// Viterbi ties go to the lower state index at the last clause, then at each
// earlier clause walking backward.
int num_states(const Structure& s);
int state_index(const Structure& s, const CollapsedState& state);
CollapsedState state_at(const Structure& s, int index);

// Clause emission under `state`: event head and every argument, slots summed
// out per argument. BKG states additionally sum over background events
// weighted by the background frame's P_E-INIT.
double clause_log_emission(const ModelParams& params, const IndexedClause& clause,
                           const CollapsedState& state);

// log P(first clause state): P_F-INIT(f) P_E-INIT(e|f) for CNT, -inf for BKG.
double initial_log_prob(const ModelParams& params, const CollapsedState& state);

// Direct transcription of the stickiness frame transition and the event
// transition, times P_BKG(next.bkg). Used by the enumeration oracle; the
// dynamic programs use a factored form of the same quantity.
double transition_log_prob(const ModelParams& params, const CollapsedState& prev,
                           const CollapsedState& next);

struct Trellis {
  std::size_t length = 0;
  int states = 0;
  std::vector<double> log_emission;  // length x states
  std::vector<double> log_alpha;     // includes the emission at each clause
  std::vector<double> log_beta;
  double log_likelihood = 0.0;

  std::span<const double> emission(std::size_t i) const { return slice(log_emission, i); }
  std::span<const double> alpha(std::size_t i) const { return slice(log_alpha, i); }
  std::span<const double> beta(std::size_t i) const { return slice(log_beta, i); }
  double posterior(std::size_t i, int s) const;

 private:
  std::span<const double> slice(const std::vector<double>& v, std::size_t i) const {
    return {v.data() + i * static_cast<std::size_t>(states), static_cast<std::size_t>(states)};
  }
};

struct ClauseAssignment {
  CollapsedState state;
  int background_event = -1;  // local background event for BKG clauses
  std::vector<int> slots;     // local slot per argument, in the emitting frame
};

struct Assignment {
  std::vector<ClauseAssignment> clauses;
  double log_joint = 0.0;  // collapsed-path score; slots stay summed out
};

// Precomputed log transition pieces for one parameter set.
class ChainModel {
 public:
  explicit ChainModel(const ModelParams& params);

  const ModelParams& params() const { return *params_; }
  const Structure& structure() const { return params_->structure; }
  int states() const { return states_; }
  int content_events() const { return content_events_; }

  // Fills `out` (size states()) with log emissions of `clause`.
  void emissions(const IndexedClause& clause, std::span<double> out) const;

  // Unnormalised per-slot scores P_SLOT(s|event,A) P_A-HEAD P_A-DEP for one
  // argument, over the slots of the event's frame.
  void slot_scores(int event, const IndexedArg& arg, std::span<double> out) const;

  // log of P_E-INIT^bkg(b) * emission(clause | background event b), per b.
  void background_event_scores(const IndexedClause& clause, std::span<double> out) const;

  Trellis forward_backward(const IndexedDocument& doc) const;
  Assignment viterbi(const IndexedDocument& doc) const;

  double log_p_cnt() const { return log_p_cnt_; }
  double log_p_bkg() const { return log_p_bkg_; }
  double log_stick(int f) const { return log_stick_[static_cast<std::size_t>(f)]; }
  double log_cross(int from, int to) const {
    return log_cross_[static_cast<std::size_t>(from * frames_ + to)];
  }
  double log_event_init(int event) const { return log_e_init_[static_cast<std::size_t>(event)]; }
  double log_event_trans(int from, int to_local) const;
  double log_frame_init(int f) const { return log_f_init_[static_cast<std::size_t>(f)]; }

 private:
  double event_log_emission(int event, const IndexedClause& clause) const;

  const ModelParams* params_;
  int frames_;
  int content_events_;
  int states_;
  double log_p_cnt_;
  double log_p_bkg_;
  std::vector<double> log_stick_;
  std::vector<double> log_cross_;
  std::vector<double> log_e_init_;
  std::vector<double> log_e_trans_;
  std::vector<std::size_t> e_trans_offset_;
  std::vector<double> log_f_init_;
};

Trellis forward_backward(const ModelParams& params, const IndexedDocument& doc);
Assignment viterbi(const ModelParams& params, const IndexedDocument& doc);

// Score of a fixed collapsed-state path with slots summed out.
double path_log_score(const ModelParams& params, const IndexedDocument& doc,
                      std::span<const CollapsedState> path);

// Enumeration oracles. Both refuse inputs with more than 10^6 state sequences.
inline constexpr double kMaxEnumeratedSequences = 1e6;

// Sums the full joint over every latent configuration: clause states,
// background events and every slot tuple.
double brute_force_loglik(const ModelParams& params, const IndexedDocument& doc);

// Exhaustive argmax over collapsed-state sequences with the same tie-break
// as viterbi().
Assignment exhaustive_viterbi(const ModelParams& params, const IndexedDocument& doc);

}  // namespace frameind

// Enumeration oracles for the chain dynamic programs. Nothing here shares code
// with the factored forward/backward/Viterbi passes except the table
// accessors and the direct transition formula.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "frameind/chain.hpp"
#include "frameind/logmath.hpp"

namespace frameind {

namespace {

// Probability of one clause given the emitting event, summing over every
// tuple of slot assignments for its arguments.
double enumerate_slot_tuples(const ModelParams& params, int event, const IndexedClause& clause) {
  const auto& s = params.structure;
  const int f = s.frame_of_event(event);
  const int nslots = s.num_slots(f);
  const std::size_t m = clause.args.size();
  std::vector<int> tuple(m, 0);
  double total = 0.0;
  while (true) {
    double p = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      const auto& a = clause.args[j];
      const int slot = s.slot_id(f, tuple[j]);
      p *= params.slot_dist(event, a.type)[static_cast<std::size_t>(tuple[j])] *
           params.arg_head(slot)[static_cast<std::size_t>(a.head)] *
           params.arg_dep(slot)[static_cast<std::size_t>(a.caseframe)];
    }
    total += p;
    std::size_t j = 0;
    while (j < m && ++tuple[j] == nslots) tuple[j++] = 0;
    if (j == m) break;
  }
  return params.event_head(event)[static_cast<std::size_t>(clause.head)] * total;
}

struct ClauseTables {
  std::vector<double> content;     // log emission per content event
  std::vector<double> background;  // log P_E-INIT^bkg(b) + log emission per background event
};

std::vector<ClauseTables> clause_tables(const ModelParams& params, const IndexedDocument& doc) {
  const auto& s = params.structure;
  const int bf = s.background_frame();
  std::vector<ClauseTables> out;
  for (const auto& clause : doc.clauses) {
    ClauseTables t;
    for (int g = 0; g < s.content_events(); ++g)
      t.content.push_back(safe_log(enumerate_slot_tuples(params, g, clause)));
    for (int b = 0; b < s.num_events(bf); ++b) {
      const double prior = params.event_init(bf)[static_cast<std::size_t>(b)];
      t.background.push_back(safe_log(prior * enumerate_slot_tuples(params, s.event_id(bf, b), clause)));
    }
    out.push_back(std::move(t));
  }
  return out;
}

// Viterbi's tie-break: compare state indices from the last clause backward.
bool reverse_less(const std::vector<int>& a, const std::vector<int>& b) {
  return std::lexicographical_compare(a.rbegin(), a.rend(), b.rbegin(), b.rend());
}

void check_size(double sequences) {
  if (sequences > kMaxEnumeratedSequences)
    throw std::length_error("enumeration would visit more than 10^6 state sequences");
}

}  // namespace

double brute_force_loglik(const ModelParams& params, const IndexedDocument& doc) {
  if (doc.clauses.empty()) throw std::invalid_argument("empty document");
  const auto& s = params.structure;
  const int G = s.content_events();
  const int nb = s.num_events(s.background_frame());
  const std::size_t L = doc.clauses.size();
  // Per clause: G content choices, then G * nb (nominal, background event) choices.
  const int choices = G + G * nb;
  check_size(std::pow(static_cast<double>(choices), static_cast<double>(L)));
  const auto tables = clause_tables(params, doc);

  auto decode = [&](int c) {
    if (c < G) {
      auto st = state_at(s, c);
      return std::pair{st, -1};
    }
    const int k = c - G;
    auto st = state_at(s, k / nb);
    st.bkg = Bkg::kBkg;
    return std::pair{st, k % nb};
  };

  double total = kNegInf;
  std::function<void(std::size_t, double, CollapsedState)> walk =
      [&](std::size_t i, double acc, CollapsedState prev) {
        if (acc == kNegInf) return;
        if (i == L) {
          total = log_add(total, acc);
          return;
        }
        for (int c = 0; c < choices; ++c) {
          auto [st, bev] = decode(c);
          double step = i == 0 ? initial_log_prob(params, st) : transition_log_prob(params, prev, st);
          if (step == kNegInf) continue;
          const double em = st.bkg == Bkg::kCnt
                                ? tables[i].content[static_cast<std::size_t>(s.event_id(st.frame, st.event))]
                                : tables[i].background[static_cast<std::size_t>(bev)];
          walk(i + 1, acc + step + em, st);
        }
      };
  walk(0, 0.0, CollapsedState{});
  return total;
}

Assignment exhaustive_viterbi(const ModelParams& params, const IndexedDocument& doc) {
  if (doc.clauses.empty()) throw std::invalid_argument("empty document");
  const auto& s = params.structure;
  const int S = num_states(s);
  const std::size_t L = doc.clauses.size();
  check_size(std::pow(static_cast<double>(S), static_cast<double>(L)));
  const auto tables = clause_tables(params, doc);

  double best = kNegInf;
  std::vector<int> best_seq, seq(L, 0);
  std::function<void(std::size_t, double)> walk = [&](std::size_t i, double acc) {
    if (acc == kNegInf) return;
    if (i == L) {
      if (best_seq.empty() || acc > best || (acc == best && reverse_less(seq, best_seq))) {
        best = acc;
        best_seq = seq;
      }
      return;
    }
    for (int c = 0; c < S; ++c) {
      const auto st = state_at(s, c);
      const double step = i == 0 ? initial_log_prob(params, st)
                                 : transition_log_prob(params, state_at(s, seq[i - 1]), st);
      if (step == kNegInf) continue;
      const double em = st.bkg == Bkg::kCnt
                            ? tables[i].content[static_cast<std::size_t>(s.event_id(st.frame, st.event))]
                            : log_sum_exp(tables[i].background);
      seq[i] = c;
      walk(i + 1, acc + step + em);
    }
  };
  walk(0, 0.0);
  if (best_seq.empty()) throw std::domain_error("no path has positive probability");

  Assignment out;
  out.log_joint = best;
  const int bf = s.background_frame();
  for (std::size_t i = 0; i < L; ++i) {
    ClauseAssignment ca;
    ca.state = state_at(s, best_seq[i]);
    int event = s.event_id(ca.state.frame, ca.state.event);
    if (ca.state.bkg == Bkg::kBkg) {
      const auto& bg = tables[i].background;
      int arg = 0;
      for (int b = 1; b < static_cast<int>(bg.size()); ++b)
        if (bg[static_cast<std::size_t>(b)] > bg[static_cast<std::size_t>(arg)]) arg = b;
      ca.background_event = arg;
      event = s.event_id(bf, arg);
    }
    const int f = s.frame_of_event(event);
    for (const auto& a : doc.clauses[i].args) {
      int best_slot = 0;
      double best_p = -1.0;
      for (int k = 0; k < s.num_slots(f); ++k) {
        const int slot = s.slot_id(f, k);
        const double p = params.slot_dist(event, a.type)[static_cast<std::size_t>(k)] *
                         params.arg_head(slot)[static_cast<std::size_t>(a.head)] *
                         params.arg_dep(slot)[static_cast<std::size_t>(a.caseframe)];
        if (p > best_p) {
          best_p = p;
          best_slot = k;
        }
      }
      ca.slots.push_back(best_slot);
    }
    out.clauses.push_back(std::move(ca));
  }
  return out;
}

}  // namespace frameind

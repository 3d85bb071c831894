#include "frameind/chain.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "frameind/error.hpp"
#include "frameind/logmath.hpp"

namespace frameind {

int num_states(const Structure& s) { return 2 * s.content_events(); }

int state_index(const Structure& s, const CollapsedState& state) {
  const int g = s.event_id(state.frame, state.event);
  return state.bkg == Bkg::kCnt ? g : s.content_events() + g;
}

CollapsedState state_at(const Structure& s, int index) {
  const int G = s.content_events();
  const Bkg b = index < G ? Bkg::kCnt : Bkg::kBkg;
  const int g = index < G ? index : index - G;
  const int f = s.frame_of_event(g);
  return {f, g - s.event_offset(f), b};
}

double Trellis::posterior(std::size_t i, int s) const {
  return std::exp(alpha(i)[static_cast<std::size_t>(s)] + beta(i)[static_cast<std::size_t>(s)] -
                  log_likelihood);
}

ChainModel::ChainModel(const ModelParams& params)
    : params_(&params),
      frames_(params.structure.num_frames()),
      content_events_(params.structure.content_events()),
      states_(num_states(params.structure)),
      log_p_cnt_(safe_log(params.p_bkg(kCnt))),
      log_p_bkg_(safe_log(params.p_bkg(kBkg))) {
  const auto& s = params.structure;
  const double beta = params.beta;
  log_stick_.resize(static_cast<std::size_t>(frames_));
  log_cross_.assign(static_cast<std::size_t>(frames_ * frames_), kNegInf);
  for (int f = 0; f < frames_; ++f) {
    auto row = params.frame_trans(f);
    log_stick_[static_cast<std::size_t>(f)] =
        safe_log(beta + (1.0 - beta) * row[static_cast<std::size_t>(f)]);
    for (int t = 0; t < frames_; ++t)
      if (t != f)
        log_cross_[static_cast<std::size_t>(f * frames_ + t)] =
            safe_log((1.0 - beta) * row[static_cast<std::size_t>(t)]);
  }
  for (double p : params.frame_init()) log_f_init_.push_back(safe_log(p));
  for (int g = 0; g < s.total_events(); ++g) {
    const int f = s.frame_of_event(g);
    log_e_init_.push_back(
        safe_log(params.event_init(f)[static_cast<std::size_t>(g - s.event_offset(f))]));
  }
  e_trans_offset_.push_back(0);
  for (int g = 0; g < content_events_; ++g) {
    for (double p : params.event_trans(g)) log_e_trans_.push_back(safe_log(p));
    e_trans_offset_.push_back(log_e_trans_.size());
  }
}

double ChainModel::log_event_trans(int from, int to_local) const {
  return log_e_trans_[e_trans_offset_[static_cast<std::size_t>(from)] +
                      static_cast<std::size_t>(to_local)];
}

void ChainModel::slot_scores(int event, const IndexedArg& arg, std::span<double> out) const {
  const auto& s = structure();
  const int f = s.frame_of_event(event);
  const int base = s.slot_offset(f);
  auto dist = params_->slot_dist(event, arg.type);
  for (int k = 0; k < s.num_slots(f); ++k) {
    out[static_cast<std::size_t>(k)] =
        dist[static_cast<std::size_t>(k)] *
        params_->arg_head(base + k)[static_cast<std::size_t>(arg.head)] *
        params_->arg_dep(base + k)[static_cast<std::size_t>(arg.caseframe)];
  }
}

double ChainModel::event_log_emission(int event, const IndexedClause& clause) const {
  const auto& s = structure();
  const int f = s.frame_of_event(event);
  const int base = s.slot_offset(f);
  double total = safe_log(params_->event_head(event)[static_cast<std::size_t>(clause.head)]);
  for (const auto& arg : clause.args) {
    if (total == kNegInf) break;
    auto dist = params_->slot_dist(event, arg.type);
    double sum = 0.0;
    for (int k = 0; k < s.num_slots(f); ++k) {
      sum += dist[static_cast<std::size_t>(k)] *
             params_->arg_head(base + k)[static_cast<std::size_t>(arg.head)] *
             params_->arg_dep(base + k)[static_cast<std::size_t>(arg.caseframe)];
    }
    total += safe_log(sum);
  }
  return total;
}

void ChainModel::background_event_scores(const IndexedClause& clause,
                                         std::span<double> out) const {
  const auto& s = structure();
  const int bf = s.background_frame();
  for (int b = 0; b < s.num_events(bf); ++b) {
    const int g = s.event_id(bf, b);
    out[static_cast<std::size_t>(b)] = log_event_init(g) + event_log_emission(g, clause);
  }
}

void ChainModel::emissions(const IndexedClause& clause, std::span<double> out) const {
  const int G = content_events_;
  for (int g = 0; g < G; ++g) out[static_cast<std::size_t>(g)] = event_log_emission(g, clause);
  std::vector<double> bkg(static_cast<std::size_t>(structure().num_events(structure().background_frame())));
  background_event_scores(clause, bkg);
  const double lb = log_sum_exp(bkg);
  for (int g = 0; g < G; ++g) out[static_cast<std::size_t>(G + g)] = lb;
}

namespace {

void require_nonempty(const IndexedDocument& doc) {
  if (doc.clauses.empty())
    throw std::invalid_argument("document '" + doc.doc_id + "' has no clauses");
}

}  // namespace

Trellis ChainModel::forward_backward(const IndexedDocument& doc) const {
  require_nonempty(doc);
  const auto& s = structure();
  const std::size_t L = doc.clauses.size();
  const int G = content_events_;
  const auto S = static_cast<std::size_t>(states_);
  const auto uG = static_cast<std::size_t>(G);

  Trellis t;
  t.length = L;
  t.states = states_;
  t.log_emission.resize(L * S);
  t.log_alpha.assign(L * S, kNegInf);
  t.log_beta.assign(L * S, 0.0);
  for (std::size_t i = 0; i < L; ++i)
    emissions(doc.clauses[i], {t.log_emission.data() + i * S, S});

  std::vector<double> nominal(uG), frame_mass(static_cast<std::size_t>(frames_)),
      cross_in(static_cast<std::size_t>(frames_)), scratch;

  for (int g = 0; g < G; ++g) {
    const auto ug = static_cast<std::size_t>(g);
    t.log_alpha[ug] = log_frame_init(s.frame_of_event(g)) + log_event_init(g) + t.log_emission[ug];
  }

  for (std::size_t i = 1; i < L; ++i) {
    const double* prev = t.log_alpha.data() + (i - 1) * S;
    double* cur = t.log_alpha.data() + i * S;
    const double* em = t.log_emission.data() + i * S;
    for (std::size_t g = 0; g < uG; ++g) nominal[g] = log_add(prev[g], prev[uG + g]);
    for (int f = 0; f < frames_; ++f) {
      frame_mass[static_cast<std::size_t>(f)] = log_sum_exp(std::span<const double>(
          nominal.data() + s.event_offset(f), static_cast<std::size_t>(s.num_events(f))));
    }
    for (int to = 0; to < frames_; ++to) {
      scratch.clear();
      for (int from = 0; from < frames_; ++from)
        if (from != to) scratch.push_back(frame_mass[static_cast<std::size_t>(from)] + log_cross(from, to));
      cross_in[static_cast<std::size_t>(to)] = log_sum_exp(scratch);
    }
    for (int f = 0; f < frames_; ++f) {
      const int off = s.event_offset(f);
      const int n = s.num_events(f);
      for (int e2 = 0; e2 < n; ++e2) {
        scratch.clear();
        for (int e1 = 0; e1 < n; ++e1)
          scratch.push_back(nominal[static_cast<std::size_t>(off + e1)] + log_event_trans(off + e1, e2));
        const double same = log_stick(f) + log_sum_exp(scratch);
        const double cross = cross_in[static_cast<std::size_t>(f)] + log_event_init(off + e2);
        const auto g = static_cast<std::size_t>(off + e2);
        cur[g] = log_p_cnt_ + log_add(same, cross) + em[g];
        cur[uG + g] = log_p_bkg_ + nominal[g] + em[uG + g];
      }
    }
  }

  t.log_likelihood = log_sum_exp(t.alpha(L - 1));
  if (!std::isfinite(t.log_likelihood))
    throw NumericError("document '" + doc.doc_id + "' has zero probability under every state path");

  std::vector<double> w(uG), wb(uG), enter(static_cast<std::size_t>(frames_)),
      leave(static_cast<std::size_t>(frames_));
  for (std::size_t i = L - 1; i-- > 0;) {
    const double* next_beta = t.log_beta.data() + (i + 1) * S;
    const double* em = t.log_emission.data() + (i + 1) * S;
    double* cur = t.log_beta.data() + i * S;
    for (std::size_t g = 0; g < uG; ++g) {
      w[g] = em[g] + next_beta[g];
      wb[g] = em[uG + g] + next_beta[uG + g];
    }
    for (int f = 0; f < frames_; ++f) {
      scratch.clear();
      for (int e = 0; e < s.num_events(f); ++e) {
        const int g = s.event_offset(f) + e;
        scratch.push_back(log_event_init(g) + w[static_cast<std::size_t>(g)]);
      }
      enter[static_cast<std::size_t>(f)] = log_sum_exp(scratch);
    }
    for (int from = 0; from < frames_; ++from) {
      scratch.clear();
      for (int to = 0; to < frames_; ++to)
        if (to != from) scratch.push_back(log_cross(from, to) + enter[static_cast<std::size_t>(to)]);
      leave[static_cast<std::size_t>(from)] = log_sum_exp(scratch);
    }
    for (int f = 0; f < frames_; ++f) {
      const int off = s.event_offset(f);
      const int n = s.num_events(f);
      for (int e1 = 0; e1 < n; ++e1) {
        scratch.clear();
        for (int e2 = 0; e2 < n; ++e2)
          scratch.push_back(log_event_trans(off + e1, e2) + w[static_cast<std::size_t>(off + e2)]);
        const double same = log_stick(f) + log_sum_exp(scratch);
        const auto g = static_cast<std::size_t>(off + e1);
        const double b = log_add(log_p_bkg_ + wb[g],
                                 log_p_cnt_ + log_add(same, leave[static_cast<std::size_t>(f)]));
        cur[g] = b;
        cur[uG + g] = b;
      }
    }
  }
  return t;
}

namespace {

struct Best {
  double score = kNegInf;
  int index = -1;

  void offer(double s, int idx) {
    if (index < 0 || s > score || (s == score && idx < index)) {
      score = s;
      index = idx;
    }
  }
};

}  // namespace

Assignment ChainModel::viterbi(const IndexedDocument& doc) const {
  require_nonempty(doc);
  const auto& s = structure();
  const std::size_t L = doc.clauses.size();
  const int G = content_events_;
  const auto S = static_cast<std::size_t>(states_);
  const auto uG = static_cast<std::size_t>(G);

  std::vector<double> em(L * S), delta(L * S, kNegInf);
  std::vector<int> back(L * S, -1);
  for (std::size_t i = 0; i < L; ++i) emissions(doc.clauses[i], {em.data() + i * S, S});
  for (int g = 0; g < G; ++g) {
    const auto ug = static_cast<std::size_t>(g);
    delta[ug] = log_frame_init(s.frame_of_event(g)) + log_event_init(g) + em[ug];
  }

  std::vector<Best> nominal(uG), frame_best(static_cast<std::size_t>(frames_)),
      cross_best(static_cast<std::size_t>(frames_));
  for (std::size_t i = 1; i < L; ++i) {
    const double* prev = delta.data() + (i - 1) * S;
    double* cur = delta.data() + i * S;
    int* bp = back.data() + i * S;
    for (int g = 0; g < G; ++g) {
      Best b;
      b.offer(prev[g], g);
      b.offer(prev[uG + static_cast<std::size_t>(g)], G + g);
      nominal[static_cast<std::size_t>(g)] = b;
    }
    for (int f = 0; f < frames_; ++f) {
      Best b;
      for (int e = 0; e < s.num_events(f); ++e) {
        const auto& n = nominal[static_cast<std::size_t>(s.event_offset(f) + e)];
        b.offer(n.score, n.index);
      }
      frame_best[static_cast<std::size_t>(f)] = b;
    }
    for (int to = 0; to < frames_; ++to) {
      Best b;
      for (int from = 0; from < frames_; ++from) {
        if (from == to) continue;
        const auto& fb = frame_best[static_cast<std::size_t>(from)];
        b.offer(fb.score + log_cross(from, to), fb.index);
      }
      cross_best[static_cast<std::size_t>(to)] = b;
    }
    for (int f = 0; f < frames_; ++f) {
      const int off = s.event_offset(f);
      const int n = s.num_events(f);
      for (int e2 = 0; e2 < n; ++e2) {
        const int g2 = off + e2;
        Best b;
        for (int e1 = 0; e1 < n; ++e1) {
          const auto& nb = nominal[static_cast<std::size_t>(off + e1)];
          b.offer(nb.score + log_stick(f) + log_event_trans(off + e1, e2), nb.index);
        }
        const auto& cb = cross_best[static_cast<std::size_t>(f)];
        if (cb.index >= 0) b.offer(cb.score + log_event_init(g2), cb.index);
        const auto ug = static_cast<std::size_t>(g2);
        cur[ug] = log_p_cnt_ + b.score + em[i * S + ug];
        bp[ug] = b.index;
        const auto& stay = nominal[ug];
        cur[uG + ug] = log_p_bkg_ + stay.score + em[i * S + uG + ug];
        bp[uG + ug] = stay.index;
      }
    }
  }

  Best last;
  for (int st = 0; st < states_; ++st) last.offer(delta[(L - 1) * S + static_cast<std::size_t>(st)], st);
  if (!std::isfinite(last.score))
    throw NumericError("document '" + doc.doc_id + "' has zero probability under every state path");

  Assignment out;
  out.log_joint = last.score;
  out.clauses.resize(L);
  int st = last.index;
  for (std::size_t i = L; i-- > 0;) {
    out.clauses[i].state = state_at(s, st);
    st = back[i * S + static_cast<std::size_t>(st)];
  }

  const int bf = s.background_frame();
  std::vector<double> scores;
  for (std::size_t i = 0; i < L; ++i) {
    auto& ca = out.clauses[i];
    const auto& clause = doc.clauses[i];
    int event = s.event_id(ca.state.frame, ca.state.event);
    if (ca.state.bkg == Bkg::kBkg) {
      scores.resize(static_cast<std::size_t>(s.num_events(bf)));
      background_event_scores(clause, scores);
      Best b;
      for (std::size_t k = 0; k < scores.size(); ++k) b.offer(scores[k], static_cast<int>(k));
      ca.background_event = b.index;
      event = s.event_id(bf, b.index);
    }
    const int nslots = s.num_slots(s.frame_of_event(event));
    scores.resize(static_cast<std::size_t>(nslots));
    for (const auto& arg : clause.args) {
      slot_scores(event, arg, scores);
      Best b;
      for (int k = 0; k < nslots; ++k) b.offer(scores[static_cast<std::size_t>(k)], k);
      ca.slots.push_back(b.index);
    }
  }
  return out;
}

Trellis forward_backward(const ModelParams& params, const IndexedDocument& doc) {
  return ChainModel(params).forward_backward(doc);
}

Assignment viterbi(const ModelParams& params, const IndexedDocument& doc) {
  return ChainModel(params).viterbi(doc);
}

double clause_log_emission(const ModelParams& params, const IndexedClause& clause,
                           const CollapsedState& state) {
  ChainModel m(params);
  std::vector<double> out(static_cast<std::size_t>(m.states()));
  m.emissions(clause, out);
  return out[static_cast<std::size_t>(state_index(params.structure, state))];
}

double initial_log_prob(const ModelParams& params, const CollapsedState& state) {
  if (state.bkg == Bkg::kBkg) return kNegInf;
  return safe_log(params.frame_init()[static_cast<std::size_t>(state.frame)]) +
         safe_log(params.event_init(state.frame)[static_cast<std::size_t>(state.event)]);
}

double transition_log_prob(const ModelParams& params, const CollapsedState& prev,
                           const CollapsedState& next) {
  if (next.bkg == Bkg::kBkg) {
    const bool frozen = prev.frame == next.frame && prev.event == next.event;
    return frozen ? safe_log(params.p_bkg(kBkg)) : kNegInf;
  }
  const double beta = params.beta;
  const double same_frame = next.frame == prev.frame ? 1.0 : 0.0;
  const double frame_factor =
      beta * same_frame +
      (1.0 - beta) * params.frame_trans(prev.frame)[static_cast<std::size_t>(next.frame)];
  double event_factor;
  if (next.frame == prev.frame) {
    const int from = params.structure.event_id(prev.frame, prev.event);
    event_factor = params.event_trans(from)[static_cast<std::size_t>(next.event)];
  } else {
    event_factor = params.event_init(next.frame)[static_cast<std::size_t>(next.event)];
  }
  return safe_log(params.p_bkg(kCnt)) + safe_log(frame_factor) + safe_log(event_factor);
}

double path_log_score(const ModelParams& params, const IndexedDocument& doc,
                      std::span<const CollapsedState> path) {
  if (path.size() != doc.clauses.size()) throw std::invalid_argument("path length mismatch");
  require_nonempty(doc);
  ChainModel m(params);
  std::vector<double> em(static_cast<std::size_t>(m.states()));
  double total = initial_log_prob(params, path[0]);
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i > 0) total += transition_log_prob(params, path[i - 1], path[i]);
    m.emissions(doc.clauses[i], em);
    total += em[static_cast<std::size_t>(state_index(params.structure, path[i]))];
  }
  return total;
}

}  // namespace frameind

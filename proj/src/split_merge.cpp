#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "frameind/learn.hpp"
#include "frameind/logmath.hpp"

namespace frameind {

SplitResult split_all(const ModelParams& params, double perturb_eps, std::uint64_t seed) {
  const auto& old = params.structure;
  std::vector<int> events, slots;
  for (int f = 0; f <= old.num_frames(); ++f) {
    events.push_back(2 * old.num_events(f));
    slots.push_back(2 * old.num_slots(f));
  }
  SplitResult out;
  out.record.split_events = old.events_per_frame();
  out.record.split_slots = old.slots_per_frame();

  ModelParams& p = out.params;
  p.structure = Structure(events, slots);
  p.sizes = params.sizes;
  p.beta = params.beta;
  p.alpha = params.alpha;
  p.tables = Tables::zeros(p.structure, p.sizes);
  const auto& ns = p.structure;
  auto& t = p.tables;
  const auto& ot = params.tables;

  t[Family::kBackground] = ot[Family::kBackground];
  t[Family::kFrameInit] = ot[Family::kFrameInit];
  t[Family::kFrameTrans] = ot[Family::kFrameTrans];

  for (int f = 0; f <= ns.num_frames(); ++f) {
    auto dst = t[Family::kEventInit].row(static_cast<std::size_t>(f));
    auto src = params.event_init(f);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = src[c / 2] / 2.0;

    for (int c = 0; c < ns.num_events(f); ++c) {
      const int g_new = ns.event_id(f, c);
      const int g_old = old.event_id(f, c / 2);
      if (f < ns.num_frames()) {
        auto row = t[Family::kEventTrans].row(static_cast<std::size_t>(g_new));
        auto orow = params.event_trans(g_old);
        for (std::size_t k = 0; k < row.size(); ++k) row[k] = orow[k / 2] / 2.0;
      }
      auto head = t[Family::kEventHead].row(static_cast<std::size_t>(g_new));
      auto ohead = params.event_head(g_old);
      std::copy(ohead.begin(), ohead.end(), head.begin());
      for (int a = 0; a < kNumArgTypes; ++a) {
        auto row = t[Family::kSlot].row(t.slot_row(g_new, static_cast<ArgType>(a)));
        auto orow = params.slot_dist(g_old, static_cast<ArgType>(a));
        for (std::size_t k = 0; k < row.size(); ++k) row[k] = orow[k / 2] / 2.0;
      }
    }
    for (int k = 0; k < ns.num_slots(f); ++k) {
      const auto s_new = static_cast<std::size_t>(ns.slot_id(f, k));
      const int s_old = old.slot_id(f, k / 2);
      auto ah = params.arg_head(s_old);
      auto ad = params.arg_dep(s_old);
      std::copy(ah.begin(), ah.end(), t[Family::kArgHead].row(s_new).begin());
      std::copy(ad.begin(), ad.end(), t[Family::kArgDep].row(s_new).begin());
    }
  }

  if (perturb_eps > 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (Family fam : {Family::kEventInit, Family::kEventTrans, Family::kEventHead, Family::kSlot,
                       Family::kArgHead, Family::kArgDep}) {
      for (auto& x : t[fam].data()) x *= 1.0 + perturb_eps * u(rng);
      normalize_rows(t[fam]);
    }
  }
  return out;
}

namespace {

struct Member {
  int old_local;
  double weight;
};

// New elements of one frame after merging: each is a list of old members
// with weights summing to one. Ordered by their smallest old index.
struct Regroup {
  std::vector<std::vector<Member>> groups;
  std::vector<int> new_of_old;
};

Regroup regroup(int count, const std::vector<const MergeCandidate*>& pairs) {
  Regroup r;
  const auto n = static_cast<std::size_t>(count);
  r.new_of_old.assign(n, -1);
  std::vector<const MergeCandidate*> by_first(n, nullptr);
  std::vector<char> used(n, 0), absorbed(n, 0);
  for (const auto* c : pairs) {
    const auto [a, b] = c->pair;
    if (a < 0 || b < 0 || a >= count || b >= count || a == b)
      throw std::invalid_argument("merge pair out of range");
    const auto lo = static_cast<std::size_t>(std::min(a, b));
    const auto hi = static_cast<std::size_t>(std::max(a, b));
    if (used[lo] || used[hi]) throw std::invalid_argument("merge pairs overlap");
    used[lo] = used[hi] = 1;
    by_first[lo] = c;
    absorbed[hi] = 1;
  }
  for (int k = 0; k < count; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    if (absorbed[uk]) continue;
    const int id = static_cast<int>(r.groups.size());
    if (const auto* c = by_first[uk]) {
      const bool first_is_a = c->pair.first == k;
      const int other = first_is_a ? c->pair.second : c->pair.first;
      const double wk = first_is_a ? c->weights.first : c->weights.second;
      r.groups.push_back({{k, wk}, {other, 1.0 - wk}});
      r.new_of_old[static_cast<std::size_t>(other)] = id;
    } else {
      r.groups.push_back({{k, 1.0}});
    }
    r.new_of_old[uk] = id;
  }
  return r;
}

}  // namespace

ModelParams merge_pairs(const ModelParams& params, const std::vector<MergeCandidate>& pairs) {
  const auto& old = params.structure;
  const int frames = old.num_frames() + 1;
  std::vector<Regroup> ev(static_cast<std::size_t>(frames)), sl(static_cast<std::size_t>(frames));
  std::vector<int> events, slots;
  for (int f = 0; f < frames; ++f) {
    std::vector<const MergeCandidate*> e_pairs, s_pairs;
    for (const auto& c : pairs) {
      if (c.frame != f) continue;
      (c.kind == MergeKind::kEvent ? e_pairs : s_pairs).push_back(&c);
    }
    ev[static_cast<std::size_t>(f)] = regroup(old.num_events(f), e_pairs);
    sl[static_cast<std::size_t>(f)] = regroup(old.num_slots(f), s_pairs);
    events.push_back(static_cast<int>(ev[static_cast<std::size_t>(f)].groups.size()));
    slots.push_back(static_cast<int>(sl[static_cast<std::size_t>(f)].groups.size()));
  }

  ModelParams p;
  p.structure = Structure(events, slots);
  p.sizes = params.sizes;
  p.beta = params.beta;
  p.alpha = params.alpha;
  p.tables = Tables::zeros(p.structure, p.sizes);
  const auto& ns = p.structure;
  auto& t = p.tables;
  const auto& ot = params.tables;
  t[Family::kBackground] = ot[Family::kBackground];
  t[Family::kFrameInit] = ot[Family::kFrameInit];
  t[Family::kFrameTrans] = ot[Family::kFrameTrans];

  for (int f = 0; f < frames; ++f) {
    const auto& er = ev[static_cast<std::size_t>(f)];
    const auto& sr = sl[static_cast<std::size_t>(f)];
    auto init = t[Family::kEventInit].row(static_cast<std::size_t>(f));
    auto oinit = params.event_init(f);
    for (std::size_t k = 0; k < oinit.size(); ++k)
      init[static_cast<std::size_t>(er.new_of_old[k])] += oinit[k];

    for (int n = 0; n < ns.num_events(f); ++n) {
      const int g_new = ns.event_id(f, n);
      for (const auto& m : er.groups[static_cast<std::size_t>(n)]) {
        const int g_old = old.event_id(f, m.old_local);
        if (f < old.num_frames()) {
          auto row = t[Family::kEventTrans].row(static_cast<std::size_t>(g_new));
          auto orow = params.event_trans(g_old);
          for (std::size_t k = 0; k < orow.size(); ++k)
            row[static_cast<std::size_t>(er.new_of_old[k])] += m.weight * orow[k];
        }
        auto head = t[Family::kEventHead].row(static_cast<std::size_t>(g_new));
        auto ohead = params.event_head(g_old);
        for (std::size_t k = 0; k < ohead.size(); ++k) head[k] += m.weight * ohead[k];
        for (int a = 0; a < kNumArgTypes; ++a) {
          auto row = t[Family::kSlot].row(t.slot_row(g_new, static_cast<ArgType>(a)));
          auto orow = params.slot_dist(g_old, static_cast<ArgType>(a));
          for (std::size_t k = 0; k < orow.size(); ++k)
            row[static_cast<std::size_t>(sr.new_of_old[k])] += m.weight * orow[k];
        }
      }
    }
    for (int n = 0; n < ns.num_slots(f); ++n) {
      const auto s_new = static_cast<std::size_t>(ns.slot_id(f, n));
      auto ah = t[Family::kArgHead].row(s_new);
      auto ad = t[Family::kArgDep].row(s_new);
      for (const auto& m : sr.groups[static_cast<std::size_t>(n)]) {
        const int s_old = old.slot_id(f, m.old_local);
        auto oah = params.arg_head(s_old);
        auto oad = params.arg_dep(s_old);
        for (std::size_t k = 0; k < oah.size(); ++k) ah[k] += m.weight * oah[k];
        for (std::size_t k = 0; k < oad.size(); ++k) ad[k] += m.weight * oad[k];
      }
    }
  }
  return p;
}

ModelParams merge_back(const ModelParams& params, const std::vector<MergeCandidate>& candidates,
                       double merge_fraction) {
  if (!(merge_fraction >= 0.0 && merge_fraction <= 1.0))
    throw std::invalid_argument("merge_fraction must lie in [0,1]");
  const auto n = static_cast<double>(candidates.size());
  const auto take = static_cast<std::size_t>(std::ceil(merge_fraction * n - 1e-9));
  std::vector<MergeCandidate> chosen(candidates.begin(),
                                     candidates.begin() + static_cast<std::ptrdiff_t>(std::min(take, candidates.size())));
  return merge_pairs(params, chosen);
}

namespace {

std::pair<double, double> relative(double a, double b) {
  const double z = a + b;
  if (!(z > 0.0)) return {0.5, 0.5};
  return {a / z, b / z};
}

double row_sum(const RowTable& t, std::size_t r) {
  auto row = t.row(r);
  return std::accumulate(row.begin(), row.end(), 0.0);
}

// Ratio by which one argument's slot-marginal changes when slots k1, k2 of
// the event's frame merge into a slot with summed P_SLOT and count-weighted
// head and caseframe rows. Exact for a fixed emitting event.
double slot_merge_ratio(const ChainModel& model, int event, const IndexedArg& arg,
                        const MergeCandidate& c, std::vector<double>& scores) {
  model.slot_scores(event, arg, scores);
  const double z = std::accumulate(scores.begin(), scores.end(), 0.0);
  if (!(z > 0.0)) return 1.0;
  const auto& p = model.params();
  const auto& s = model.structure();
  const int f = s.frame_of_event(event);
  const auto [k1, k2] = c.pair;
  const auto [w1, w2] = c.weights;
  const int s1 = s.slot_id(f, k1), s2 = s.slot_id(f, k2);
  const auto h = static_cast<std::size_t>(arg.head), d = static_cast<std::size_t>(arg.caseframe);
  const auto dist = p.slot_dist(event, arg.type);
  const double P = dist[static_cast<std::size_t>(k1)] + dist[static_cast<std::size_t>(k2)];
  const double merged = P * (w1 * p.arg_head(s1)[h] + w2 * p.arg_head(s2)[h]) *
                        (w1 * p.arg_dep(s1)[d] + w2 * p.arg_dep(s2)[d]);
  return (z - scores[static_cast<std::size_t>(k1)] - scores[static_cast<std::size_t>(k2)] + merged) / z;
}

// log emission of `clause` by the event that merging events g1 and g2 would
// produce: head and slot rows averaged with weights w1, w2.
double merged_event_log_emission(const ChainModel& model, int g1, int g2, double w1, double w2,
                                 const IndexedClause& clause, std::vector<double>& scores) {
  const auto& p = model.params();
  const auto h = static_cast<std::size_t>(clause.head);
  double out = safe_log(w1 * p.event_head(g1)[h] + w2 * p.event_head(g2)[h]);
  for (const auto& arg : clause.args) {
    if (out == kNegInf) break;
    model.slot_scores(g1, arg, scores);
    const double z1 = std::accumulate(scores.begin(), scores.end(), 0.0);
    model.slot_scores(g2, arg, scores);
    const double z2 = std::accumulate(scores.begin(), scores.end(), 0.0);
    out += safe_log(w1 * z1 + w2 * z2);
  }
  return out;
}

double clause_slot_ratio(const ChainModel& model, int event, const IndexedClause& clause,
                         const MergeCandidate& c, std::vector<double>& scores) {
  double r = 1.0;
  for (const auto& arg : clause.args) r *= slot_merge_ratio(model, event, arg, c, scores);
  return r;
}

void approximate_losses(const ChainModel& model, const IndexedDocument& doc,
                        std::vector<MergeCandidate>& cands) {
  const auto& s = model.structure();
  const auto& p = model.params();
  const Trellis tr = model.forward_backward(doc);
  const double Z = tr.log_likelihood;
  const int G = s.content_events();
  const int bf = s.background_frame();
  const int nb = s.num_events(bf);
  std::vector<double> q(static_cast<std::size_t>(nb)), scores;

  auto outside = [](double alpha, double em) { return em == kNegInf ? kNegInf : alpha - em; };

  for (std::size_t i = 0; i < tr.length; ++i) {
    const auto& clause = doc.clauses[i];
    const auto A = tr.alpha(i), B = tr.beta(i), E = tr.emission(i);
    double bkg_mass = 0.0;
    for (int g = 0; g < G; ++g) bkg_mass += tr.posterior(i, G + g);
    model.background_event_scores(clause, q);
    const double lq = log_sum_exp(q);
    std::vector<double> qn(q.size());
    for (std::size_t b = 0; b < q.size(); ++b) qn[b] = std::exp(q[b] - lq);

    for (auto& c : cands) {
      const auto [k1, k2] = c.pair;
      const auto [w1, w2] = c.weights;
      double r = 1.0;
      if (c.kind == MergeKind::kEvent && c.frame != bf) {
        const int g1 = s.event_id(c.frame, k1), g2 = s.event_id(c.frame, k2);
        scores.resize(static_cast<std::size_t>(s.num_slots(c.frame)));
        const double em_cnt = merged_event_log_emission(model, g1, g2, w1, w2, clause, scores);
        r = 1.0;
        for (int b = 0; b < 2; ++b) {
          const auto s1 = static_cast<std::size_t>(b * G + g1), s2 = static_cast<std::size_t>(b * G + g2);
          r -= tr.posterior(i, static_cast<int>(s1)) + tr.posterior(i, static_cast<int>(s2));
          // BKG copies keep the background emission; only the frozen nominal merges.
          const double em = b == 0 ? em_cnt : E[s1];
          const double in = em + log_add(safe_log(w1) + B[s1], safe_log(w2) + B[s2]);
          const double out = log_add(outside(A[s1], E[s1]), outside(A[s2], E[s2]));
          if (in != kNegInf && out != kNegInf) r += std::exp(in + out - Z);
        }
      } else if (c.kind == MergeKind::kEvent) {
        const auto init = p.event_init(bf);
        const double P = init[static_cast<std::size_t>(k1)] + init[static_cast<std::size_t>(k2)];
        scores.resize(static_cast<std::size_t>(s.num_slots(bf)));
        const double em = merged_event_log_emission(model, s.event_id(bf, k1), s.event_id(bf, k2), w1,
                                                    w2, clause, scores);
        const double merged = em == kNegInf ? 0.0 : std::exp(safe_log(P) + em - lq);
        const double ratio =
            1.0 - qn[static_cast<std::size_t>(k1)] - qn[static_cast<std::size_t>(k2)] + merged;
        r = 1.0 + bkg_mass * (ratio - 1.0);
      } else {
        scores.resize(static_cast<std::size_t>(s.num_slots(c.frame)));
        if (c.frame != bf) {
          r = 1.0;
          for (int e = 0; e < s.num_events(c.frame); ++e) {
            const int g = s.event_id(c.frame, e);
            const double post = tr.posterior(i, g);
            if (post <= 0.0) continue;
            r += post * (clause_slot_ratio(model, g, clause, c, scores) - 1.0);
          }
        } else {
          double ratio = 0.0;
          for (int b = 0; b < nb; ++b)
            ratio += qn[static_cast<std::size_t>(b)] *
                     clause_slot_ratio(model, s.event_id(bf, b), clause, c, scores);
          r = 1.0 + bkg_mass * (ratio - 1.0);
        }
      }
      c.loss -= std::log(std::max(r, 1e-300));
    }
  }
}

}  // namespace

std::vector<MergeCandidate> score_merges(const ModelParams& params, const SplitRecord& record,
                                         const IndexedCorpus& corpus, MergeScoring mode,
                                         int workers) {
  const auto& s = params.structure;
  const int frames = s.num_frames() + 1;
  if (static_cast<int>(record.split_events.size()) != frames ||
      static_cast<int>(record.split_slots.size()) != frames)
    throw std::invalid_argument("split record does not match the model structure");

  const SufficientStats stats = corpus_e_step(params, corpus, workers);
  const auto& counts = stats.counts;
  std::vector<MergeCandidate> cands;
  for (int f = 0; f < frames; ++f) {
    if (2 * record.split_events[static_cast<std::size_t>(f)] > s.num_events(f) ||
        2 * record.split_slots[static_cast<std::size_t>(f)] > s.num_slots(f))
      throw std::invalid_argument("split record refers to missing elements");
    for (int k = 0; k < record.split_events[static_cast<std::size_t>(f)]; ++k) {
      MergeCandidate c;
      c.kind = MergeKind::kEvent;
      c.frame = f;
      c.pair = {2 * k, 2 * k + 1};
      c.weights = relative(
          row_sum(counts[Family::kEventHead], static_cast<std::size_t>(s.event_id(f, 2 * k))),
          row_sum(counts[Family::kEventHead], static_cast<std::size_t>(s.event_id(f, 2 * k + 1))));
      cands.push_back(c);
    }
  }
  for (int f = 0; f < frames; ++f) {
    for (int k = 0; k < record.split_slots[static_cast<std::size_t>(f)]; ++k) {
      MergeCandidate c;
      c.kind = MergeKind::kSlot;
      c.frame = f;
      c.pair = {2 * k, 2 * k + 1};
      c.weights = relative(
          row_sum(counts[Family::kArgHead], static_cast<std::size_t>(s.slot_id(f, 2 * k))),
          row_sum(counts[Family::kArgHead], static_cast<std::size_t>(s.slot_id(f, 2 * k + 1))));
      cands.push_back(c);
    }
  }

  if (mode == MergeScoring::kExact) {
    for (auto& c : cands) {
      const double merged = corpus_loglik(merge_pairs(params, {c}), corpus, workers);
      c.loss = stats.log_likelihood - merged;
    }
  } else {
    const ChainModel model(params);
    for (const auto& doc : corpus.documents) approximate_losses(model, doc, cands);
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const MergeCandidate& a, const MergeCandidate& b) { return a.loss < b.loss; });
  return cands;
}

}  // namespace frameind

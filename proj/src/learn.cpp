#include "frameind/learn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include "frameind/logmath.hpp"

namespace frameind {

void SparseStats::compact() {
  for (auto& list : entries) {
    std::stable_sort(list.begin(), list.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::size_t out = 0;
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (out > 0 && list[out - 1].first == list[i].first)
        list[out - 1].second += list[i].second;
      else
        list[out++] = list[i];
    }
    list.resize(out);
  }
}

void SparseStats::apply_to(SufficientStats& dst, double sign) const {
  for (int f = 0; f < kNumFamilies; ++f) {
    auto& data = dst.counts.family[static_cast<std::size_t>(f)].data();
    for (const auto& [i, v] : entries[static_cast<std::size_t>(f)]) data[i] += sign * v;
  }
  dst.log_likelihood += sign * log_likelihood;
}

namespace {

template <class Sink>
void add_clause_emissions(const ChainModel& model, const IndexedClause& clause, int event,
                          double weight, Sink& sink, std::vector<double>& scores) {
  const auto& p = model.params();
  const auto& s = model.structure();
  const auto& t = p.tables;
  sink.add(Family::kEventHead,
           t[Family::kEventHead].row_offset(static_cast<std::size_t>(event)) +
               static_cast<std::size_t>(clause.head),
           weight);
  const int f = s.frame_of_event(event);
  const int nslots = s.num_slots(f);
  scores.resize(static_cast<std::size_t>(nslots));
  for (const auto& arg : clause.args) {
    model.slot_scores(event, arg, scores);
    const double z = std::accumulate(scores.begin(), scores.end(), 0.0);
    if (!(z > 0.0)) continue;
    const std::size_t slot_row = t[Family::kSlot].row_offset(t.slot_row(event, arg.type));
    for (int k = 0; k < nslots; ++k) {
      const double w = weight * scores[static_cast<std::size_t>(k)] / z;
      if (w <= 0.0) continue;
      const auto slot = static_cast<std::size_t>(s.slot_id(f, k));
      sink.add(Family::kSlot, slot_row + static_cast<std::size_t>(k), w);
      sink.add(Family::kArgHead, t[Family::kArgHead].row_offset(slot) + static_cast<std::size_t>(arg.head), w);
      sink.add(Family::kArgDep, t[Family::kArgDep].row_offset(slot) + static_cast<std::size_t>(arg.caseframe), w);
    }
  }
}

template <class Sink>
double accumulate(const ChainModel& model, const IndexedDocument& doc, Sink& sink) {
  const auto& p = model.params();
  const auto& s = model.structure();
  const auto& tab = p.tables;
  const Trellis tr = model.forward_backward(doc);
  const double Z = tr.log_likelihood;
  const int G = s.content_events();
  const int F = s.num_frames();
  const int bf = s.background_frame();
  const std::size_t L = tr.length;

  std::vector<double> gamma(static_cast<std::size_t>(tr.states)), scores, bkg_scores;
  for (std::size_t i = 0; i < L; ++i) {
    const auto& clause = doc.clauses[i];
    double cnt_mass = 0.0, bkg_mass = 0.0;
    for (int st = 0; st < tr.states; ++st) {
      gamma[static_cast<std::size_t>(st)] = tr.posterior(i, st);
      (st < G ? cnt_mass : bkg_mass) += gamma[static_cast<std::size_t>(st)];
    }
    if (i > 0) {
      sink.add(Family::kBackground, kCnt, cnt_mass);
      sink.add(Family::kBackground, kBkg, bkg_mass);
    }
    for (int g = 0; g < G; ++g) {
      const double w = gamma[static_cast<std::size_t>(g)];
      if (w <= 0.0) continue;
      if (i == 0) {
        const int f = s.frame_of_event(g);
        sink.add(Family::kFrameInit, static_cast<std::size_t>(f), w);
        sink.add(Family::kEventInit,
                 tab[Family::kEventInit].row_offset(static_cast<std::size_t>(f)) +
                     static_cast<std::size_t>(g - s.event_offset(f)),
                 w);
      }
      add_clause_emissions(model, clause, g, w, sink, scores);
    }
    if (bkg_mass > 0.0) {
      bkg_scores.resize(static_cast<std::size_t>(s.num_events(bf)));
      model.background_event_scores(clause, bkg_scores);
      const double lz = log_sum_exp(bkg_scores);
      for (int b = 0; b < s.num_events(bf); ++b) {
        const double w = bkg_mass * std::exp(bkg_scores[static_cast<std::size_t>(b)] - lz);
        if (w <= 0.0) continue;
        sink.add(Family::kEventInit,
                 tab[Family::kEventInit].row_offset(static_cast<std::size_t>(bf)) +
                     static_cast<std::size_t>(b),
                 w);
        add_clause_emissions(model, clause, s.event_id(bf, b), w, sink, scores);
      }
    }
  }

  if (L < 2) return Z;

  const auto uG = static_cast<std::size_t>(G);
  const auto uF = static_cast<std::size_t>(F);
  std::vector<double> nominal(uG), w(uG), frame_mass(uF), enter(uF), stay(uF), scratch;
  for (std::size_t i = 0; i + 1 < L; ++i) {
    const auto alpha = tr.alpha(i);
    const auto em = tr.emission(i + 1);
    const auto beta = tr.beta(i + 1);
    for (std::size_t g = 0; g < uG; ++g) {
      nominal[g] = log_add(alpha[g], alpha[uG + g]);
      w[g] = em[g] + beta[g];
    }
    for (int f = 0; f < F; ++f) {
      const auto off = static_cast<std::size_t>(s.event_offset(f));
      const auto n = static_cast<std::size_t>(s.num_events(f));
      frame_mass[static_cast<std::size_t>(f)] = log_sum_exp(std::span<const double>(nominal.data() + off, n));
      scratch.clear();
      for (std::size_t e = 0; e < n; ++e)
        scratch.push_back(model.log_event_init(static_cast<int>(off + e)) + w[off + e]);
      enter[static_cast<std::size_t>(f)] = log_sum_exp(scratch);
    }
    const double lc = model.log_p_cnt();

    std::fill(stay.begin(), stay.end(), 0.0);
    for (int f = 0; f < F; ++f) {
      const int off = s.event_offset(f);
      const int n = s.num_events(f);
      for (int e1 = 0; e1 < n; ++e1) {
        const auto g1 = static_cast<std::size_t>(off + e1);
        const std::size_t row = tab[Family::kEventTrans].row_offset(g1);
        for (int e2 = 0; e2 < n; ++e2) {
          const double xi = std::exp(nominal[g1] + lc + model.log_stick(f) +
                                     model.log_event_trans(off + e1, e2) +
                                     w[static_cast<std::size_t>(off + e2)] - Z);
          if (xi <= 0.0) continue;
          sink.add(Family::kEventTrans, row + static_cast<std::size_t>(e2), xi);
          stay[static_cast<std::size_t>(f)] += xi;
        }
      }
    }
    for (int to = 0; to < F; ++to) {
      scratch.clear();
      for (int from = 0; from < F; ++from) {
        if (from == to) continue;
        const double lx = frame_mass[static_cast<std::size_t>(from)] + model.log_cross(from, to);
        scratch.push_back(lx);
        const double c = std::exp(lx + lc + enter[static_cast<std::size_t>(to)] - Z);
        if (c > 0.0) sink.add(Family::kFrameTrans, static_cast<std::size_t>(from * F + to), c);
      }
      const double cross_in = log_sum_exp(scratch);
      if (cross_in == kNegInf) continue;
      const int off = s.event_offset(to);
      const std::size_t row = tab[Family::kEventInit].row_offset(static_cast<std::size_t>(to));
      for (int e = 0; e < s.num_events(to); ++e) {
        const double c = std::exp(cross_in + lc + model.log_event_init(off + e) +
                                  w[static_cast<std::size_t>(off + e)] - Z);
        if (c > 0.0) sink.add(Family::kEventInit, row + static_cast<std::size_t>(e), c);
      }
    }
    // Only the non-sticky share of a same-frame step is evidence for P_F-TRAN(f|f).
    for (int f = 0; f < F; ++f) {
      const double self = (1.0 - p.beta) * p.frame_trans(f)[static_cast<std::size_t>(f)];
      const double denom = p.beta + self;
      const double c = stay[static_cast<std::size_t>(f)] * (denom > 0.0 ? self / denom : 0.0);
      if (c > 0.0) sink.add(Family::kFrameTrans, static_cast<std::size_t>(f * F + f), c);
    }
  }
  return Z;
}

}  // namespace

double e_step(const ChainModel& model, const IndexedDocument& doc, SufficientStats& stats) {
  const double ll = accumulate(model, doc, stats);
  stats.log_likelihood += ll;
  return ll;
}

double e_step(const ChainModel& model, const IndexedDocument& doc, SparseStats& stats) {
  const double ll = accumulate(model, doc, stats);
  stats.log_likelihood += ll;
  stats.compact();
  return ll;
}

SufficientStats e_step(const ModelParams& params, const IndexedDocument& doc) {
  SufficientStats stats(params.structure, params.sizes);
  e_step(ChainModel(params), doc, stats);
  return stats;
}

SufficientStats corpus_e_step(const ModelParams& params, const IndexedCorpus& corpus, int workers) {
  const ChainModel model(params);
  const std::size_t n = corpus.documents.size();
  const std::size_t blocks = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1,
                                                     std::max<std::size_t>(n, 1));
  std::vector<SufficientStats> partial(blocks, SufficientStats(params.structure, params.sizes));
  std::vector<std::exception_ptr> errors(blocks);
  auto run = [&](std::size_t b) {
    try {
      const std::size_t lo = n * b / blocks, hi = n * (b + 1) / blocks;
      for (std::size_t d = lo; d < hi; ++d) e_step(model, corpus.documents[d], partial[b]);
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
  for (std::size_t b = 1; b < blocks; ++b) partial[0] += partial[b];
  return std::move(partial[0]);
}

double corpus_loglik(const ModelParams& params, const IndexedCorpus& corpus, int workers) {
  if (workers <= 1) {
    const ChainModel model(params);
    double total = 0.0;
    for (const auto& d : corpus.documents) total += model.forward_backward(d).log_likelihood;
    return total;
  }
  return corpus_e_step(params, corpus, workers).log_likelihood;
}

EmResult batch_em(const ModelParams& params, const IndexedCorpus& corpus, int iterations,
                  int workers) {
  if (iterations < 1) throw std::invalid_argument("batch_em needs at least one iteration");
  EmResult r{params, {}, {}};
  for (int it = 0; it < iterations; ++it) {
    auto stats = corpus_e_step(r.params, corpus, workers);
    r.loglik.push_back(stats.log_likelihood);
    r.trace.push_back(stats.log_likelihood + log_prior(r.params));
    r.params = m_step(stats, r.params);
  }
  const double ll = corpus_loglik(r.params, corpus, workers);
  r.loglik.push_back(ll);
  r.trace.push_back(ll + log_prior(r.params));
  return r;
}

EmResult incremental_em(const ModelParams& params, const IndexedCorpus& corpus, int iterations,
                        std::uint64_t seed) {
  if (iterations < 1) throw std::invalid_argument("incremental_em needs at least one iteration");
  const std::size_t n = corpus.documents.size();
  EmResult r{params, {}, {}};
  std::vector<SparseStats> per_doc(n);
  SufficientStats total(params.structure, params.sizes);
  {
    const ChainModel model(r.params);
    for (std::size_t d = 0; d < n; ++d) {
      e_step(model, corpus.documents[d], per_doc[d]);
      per_doc[d].apply_to(total, 1.0);
    }
  }
  r.loglik.push_back(total.log_likelihood);
  r.trace.push_back(total.log_likelihood + log_prior(r.params));
  r.params = m_step(total, r.params);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  for (int it = 1; it < iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double pass_ll = 0.0;
    const double prior = log_prior(r.params);
    for (std::size_t d : order) {
      SparseStats fresh;
      pass_ll += e_step(ChainModel(r.params), corpus.documents[d], fresh);
      per_doc[d].apply_to(total, -1.0);
      fresh.apply_to(total, 1.0);
      per_doc[d] = std::move(fresh);
      total.clamp_nonnegative();
      r.params = m_step(total, r.params);
    }
    r.loglik.push_back(pass_ll);
    r.trace.push_back(pass_ll + prior);
  }
  const double ll = corpus_loglik(r.params, corpus);
  r.loglik.push_back(ll);
  r.trace.push_back(ll + log_prior(r.params));
  return r;
}

nlohmann::json TrainReport::to_json(bool with_timing) const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : stages) {
    nlohmann::json j = {{"cycle", s.cycle},
                        {"stage", s.stage},
                        {"loglik", s.loglik},
                        {"penalized_loglik", s.penalized},
                        {"events_per_frame", s.events_per_frame},
                        {"slots_per_frame", s.slots_per_frame}};
    if (with_timing) j["seconds"] = s.seconds;
    out.push_back(std::move(j));
  }
  return out;
}

TrainResult train(const Structure& initial, const VocabSizes& sizes, const IndexedCorpus& corpus,
                  const TrainSchedule& schedule, double beta, const Smoothing& alpha) {
  if (schedule.cycles < 1) throw std::invalid_argument("cycles must be positive");
  if (schedule.em_iters_per_cycle < 1) throw std::invalid_argument("em_iters_per_cycle must be positive");
  if (schedule.post_merge_iters < 0) throw std::invalid_argument("post_merge_iters must be non-negative");
  if (!(schedule.merge_fraction >= 0.0 && schedule.merge_fraction <= 1.0))
    throw std::invalid_argument("merge_fraction must lie in [0,1]");

  TrainResult out;
  auto clock_start = std::chrono::steady_clock::now();
  auto record = [&](int cycle, const char* stage, const ModelParams& p) {
    const double ll = corpus_loglik(p, corpus, schedule.workers);
    const auto now = std::chrono::steady_clock::now();
    out.report.stages.push_back({cycle, stage, ll, ll + log_prior(p), p.structure.events_per_frame(),
                                 p.structure.slots_per_frame(),
                                 std::chrono::duration<double>(now - clock_start).count()});
    clock_start = now;
  };
  std::uint64_t em_seed = schedule.seed;
  auto run_em = [&](const ModelParams& p, int iters) {
    if (schedule.mode == EmMode::kBatch) return batch_em(p, corpus, iters, schedule.workers).params;
    return incremental_em(p, corpus, iters, ++em_seed * 0x9E3779B97F4A7C15ULL).params;
  };

  ModelParams p = init_model(initial, sizes, schedule.seed, schedule.init_jitter, beta, alpha);
  record(0, "init", p);
  for (int cycle = 1; cycle <= schedule.cycles; ++cycle) {
    p = run_em(p, schedule.em_iters_per_cycle);
    record(cycle, "em", p);
    if (cycle == schedule.cycles) break;

    p.alpha = p.alpha.halved();
    auto split = split_all(p, schedule.perturb_eps, schedule.seed + static_cast<std::uint64_t>(cycle));
    p = std::move(split.params);
    record(cycle, "split", p);
    p = run_em(p, schedule.em_iters_per_cycle);
    record(cycle, "split_em", p);
    const auto candidates = score_merges(p, split.record, corpus, schedule.merge_scoring, schedule.workers);
    p = merge_back(p, candidates, schedule.merge_fraction);
    record(cycle, "merge", p);
    if (schedule.post_merge_iters > 0) {
      p = run_em(p, schedule.post_merge_iters);
      record(cycle, "post_merge_em", p);
    }
  }
  out.params = std::move(p);
  return out;
}

}  // namespace frameind

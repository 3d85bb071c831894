#include "frameind/synth.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>

namespace frameind {

using nlohmann::json;

namespace {

std::string block_word(const char* prefix, int owner, int i) {
  return std::string(prefix) + std::to_string(owner) + "_" + std::to_string(i);
}

// `sharpness` on [begin, begin+width), the rest spread over the other
// non-UNK entries.
void fill_block(std::span<double> row, std::size_t begin, std::size_t width, double sharpness) {
  const std::size_t others = row.size() - 1 - width;
  for (std::size_t k = 1; k < row.size(); ++k) {
    const bool own = k >= begin && k < begin + width;
    row[k] = own ? sharpness / static_cast<double>(width)
                 : (others ? (1.0 - sharpness) / static_cast<double>(others) : 0.0);
  }
  row[0] = 0.0;
  if (others == 0)
    for (std::size_t k = begin; k < begin + width; ++k) row[k] = 1.0 / static_cast<double>(width);
}

void fill_peak(std::span<double> row, std::size_t peak, double sharpness) {
  if (row.size() == 1) {
    row[0] = 1.0;
    return;
  }
  for (std::size_t k = 0; k < row.size(); ++k)
    row[k] = k == peak ? sharpness : (1.0 - sharpness) / static_cast<double>(row.size() - 1);
}

void fill_uniform(std::span<double> row) {
  for (auto& x : row) x = 1.0 / static_cast<double>(row.size());
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  int categorical(std::span<const double> p) {
    const double u = uniform();
    double acc = 0.0;
    int last = -1;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (p[k] <= 0.0) continue;
      acc += p[k];
      last = static_cast<int>(k);
      if (u < acc) return last;
    }
    if (last < 0) throw std::domain_error("cannot sample from an all-zero row");
    return last;
  }

  int between(int lo, int hi) {
    return lo + static_cast<int>(rng_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

Model planted_model(const PlantedConfig& c) {
  if (c.num_frames < 1 || c.events_per_frame < 1 || c.slots_per_frame < 1 || c.bkg_events < 1 ||
      c.bkg_slots < 1 || c.words_per_event < 1 || c.words_per_slot < 1)
    throw std::invalid_argument("planted model sizes must be positive");
  std::vector<int> events(static_cast<std::size_t>(c.num_frames), c.events_per_frame);
  std::vector<int> slots(static_cast<std::size_t>(c.num_frames), c.slots_per_frame);
  events.push_back(c.bkg_events);
  slots.push_back(c.bkg_slots);
  const Structure s(events, slots);

  Model m;
  for (int g = 0; g < s.total_events(); ++g)
    for (int i = 0; i < c.words_per_event; ++i) m.vocab.event_heads.add(block_word("ev", g, i), 0);
  for (int k = 0; k < s.total_slots(); ++k) {
    for (int i = 0; i < c.words_per_slot; ++i) {
      m.vocab.arg_heads.add(block_word("ah", k, i), 0);
      m.vocab.caseframes.add(block_word("d", k, i), 0);
    }
  }

  ModelParams& p = m.params;
  p.structure = s;
  p.sizes = VocabSizes::of(m.vocab);
  p.beta = c.beta;
  p.tables = Tables::zeros(s, p.sizes);
  auto& t = p.tables;
  auto bkg = t[Family::kBackground].row(0);
  bkg[kCnt] = 1.0 - c.p_background;
  bkg[kBkg] = c.p_background;
  fill_uniform(t[Family::kFrameInit].row(0));
  for (int f = 0; f < s.num_frames(); ++f) fill_uniform(t[Family::kFrameTrans].row(static_cast<std::size_t>(f)));

  const auto we = static_cast<std::size_t>(c.words_per_event);
  const auto ws = static_cast<std::size_t>(c.words_per_slot);
  for (int f = 0; f <= s.num_frames(); ++f) {
    fill_uniform(t[Family::kEventInit].row(static_cast<std::size_t>(f)));
    const int ne = s.num_events(f), ns = s.num_slots(f);
    for (int e = 0; e < ne; ++e) {
      const int g = s.event_id(f, e);
      const auto ug = static_cast<std::size_t>(g);
      if (f < s.num_frames())
        fill_peak(t[Family::kEventTrans].row(ug), static_cast<std::size_t>((e + 1) % ne), c.sharpness);
      fill_block(t[Family::kEventHead].row(ug), 1 + ug * we, we, c.sharpness);
      for (int a = 0; a < kNumArgTypes; ++a)
        fill_peak(t[Family::kSlot].row(t.slot_row(g, static_cast<ArgType>(a))),
                  static_cast<std::size_t>(a % ns), c.sharpness);
    }
    for (int k = 0; k < ns; ++k) {
      const auto uk = static_cast<std::size_t>(s.slot_id(f, k));
      fill_block(t[Family::kArgHead].row(uk), 1 + uk * ws, ws, c.sharpness);
      fill_block(t[Family::kArgDep].row(uk), 1 + uk * ws, ws, c.sharpness);
    }
  }
  m.metadata = {{"planted", true}};
  return m;
}

PlantedCorpus sample_corpus(const Model& model, int n_docs, const SamplerConfig& cfg,
                            std::uint64_t seed) {
  if (n_docs < 0 || cfg.min_clauses < 1 || cfg.max_clauses < cfg.min_clauses || cfg.min_args < 0 ||
      cfg.max_args < cfg.min_args)
    throw std::invalid_argument("invalid sampler configuration");
  const auto& p = model.params;
  const auto& s = p.structure;
  const int bf = s.background_frame();
  PlantedCorpus out;
  out.params = p;

  for (int d = 0; d < n_docs; ++d) {
    Sampler rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(d))));
    Document doc;
    doc.doc_id = "doc" + std::to_string(d);
    IndexedDocument idoc;
    idoc.doc_id = doc.doc_id;
    Assignment truth;
    std::vector<CollapsedState> path;

    const int L = rng.between(cfg.min_clauses, cfg.max_clauses);
    CollapsedState prev;
    for (int i = 0; i < L; ++i) {
      ClauseAssignment ca;
      if (i == 0) {
        ca.state.frame = rng.categorical(p.frame_init());
        ca.state.event = rng.categorical(p.event_init(ca.state.frame));
      } else if (rng.uniform() < p.p_bkg(kBkg)) {
        ca.state = prev;
        ca.state.bkg = Bkg::kBkg;
      } else {
        const int f = prev.frame;
        const int nf = rng.uniform() < p.beta ? f : rng.categorical(p.frame_trans(f));
        ca.state.frame = nf;
        ca.state.event = nf == f ? rng.categorical(p.event_trans(s.event_id(f, prev.event)))
                                 : rng.categorical(p.event_init(nf));
      }
      int event;
      if (ca.state.bkg == Bkg::kBkg) {
        ca.background_event = rng.categorical(p.event_init(bf));
        event = s.event_id(bf, ca.background_event);
      } else {
        event = s.event_id(ca.state.frame, ca.state.event);
      }
      const int frame = s.frame_of_event(event);

      ClauseRecord rec;
      rec.doc_id = doc.doc_id;
      rec.sentence_index = i;
      rec.clause_index = i;
      IndexedClause ic;
      ic.head = rng.categorical(p.event_head(event));
      rec.event_head_lemma = model.vocab.event_heads.word(ic.head);
      const int m = rng.between(cfg.min_args, cfg.max_args);
      for (int j = 0; j < m; ++j) {
        IndexedArg ia;
        ia.type = static_cast<ArgType>(rng.between(0, kNumArgTypes - 1));
        const int slot = rng.categorical(p.slot_dist(event, ia.type));
        const int gslot = s.slot_id(frame, slot);
        ia.caseframe = rng.categorical(p.arg_dep(gslot));
        ia.head = rng.categorical(p.arg_head(gslot));
        ArgumentRecord ar;
        ar.arg_type = ia.type;
        ar.head_lemma = model.vocab.arg_heads.word(ia.head);
        ar.dep_label = model.vocab.caseframes.word(ia.caseframe);
        ar.caseframe = make_caseframe(rec.event_head_lemma, ar.dep_label);
        rec.args.push_back(std::move(ar));
        ic.args.push_back(ia);
        ca.slots.push_back(slot);
      }
      prev = ca.state;
      path.push_back(ca.state);
      doc.clauses.push_back(std::move(rec));
      idoc.clauses.push_back(std::move(ic));
      truth.clauses.push_back(std::move(ca));
    }
    truth.log_joint = path_log_score(p, idoc, path);
    out.corpus.documents.push_back(std::move(doc));
    out.indexed.documents.push_back(std::move(idoc));
    out.truth.push_back(std::move(truth));
  }
  return out;
}

Model textual_model(const Model& planted) {
  Model m = planted;
  m.vocab.caseframes = Vocabulary();
  const int heads = planted.vocab.event_heads.size(), deps = planted.vocab.caseframes.size();
  for (int e = 1; e < heads; ++e)
    for (int d = 1; d < deps; ++d)
      m.vocab.caseframes.add(make_caseframe(planted.vocab.event_heads.word(e), planted.vocab.caseframes.word(d)), 0);
  m.params.sizes = VocabSizes::of(m.vocab);
  const auto& old = planted.params.tables[Family::kArgDep];
  RowTable dep(std::vector<std::size_t>(old.rows(), static_cast<std::size_t>(m.vocab.caseframes.size())));
  const double share = 1.0 / static_cast<double>(heads - 1);
  for (std::size_t k = 0; k < old.rows(); ++k) {
    auto row = dep.row(k);
    const auto src = old.row(k);
    for (int e = 1; e < heads; ++e)
      for (int d = 1; d < deps; ++d)
        row[static_cast<std::size_t>(1 + (e - 1) * (deps - 1) + (d - 1))] = src[static_cast<std::size_t>(d)] * share;
    row[0] = src[0];
  }
  m.params.tables[Family::kArgDep] = std::move(dep);
  return m;
}

void write_truth(std::ostream& out, const PlantedCorpus& planted) {
  const auto& s = planted.params.structure;
  for (std::size_t d = 0; d < planted.truth.size(); ++d) {
    const auto& doc = planted.corpus.documents[d];
    for (std::size_t i = 0; i < doc.clauses.size(); ++i) {
      const auto& ca = planted.truth[d].clauses[i];
      const bool bkg = ca.state.bkg == Bkg::kBkg;
      json j = {{"doc_id", doc.doc_id},
                {"clause_index", doc.clauses[i].clause_index},
                {"frame", ca.state.frame},
                {"event", ca.state.event},
                {"bkg", bkg},
                {"slots", ca.slots}};
      if (bkg) {
        j["background_event"] = ca.background_event;
        j["background_frame"] = s.background_frame();
      }
      out << j.dump() << '\n';
    }
  }
}

json RecoveryScore::to_json() const {
  return {{"slot_precision", slot_precision}, {"slot_recall", slot_recall},
          {"slot_f1", slot_f1},               {"slot_purity", slot_purity},
          {"event_f1", event_f1},             {"event_purity", event_purity}};
}

std::vector<int> hungarian_max(const std::vector<std::vector<double>>& weight) {
  const std::size_t rows = weight.size();
  const std::size_t cols = rows ? weight[0].size() : 0;
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  double wmax = 0.0;
  for (const auto& r : weight) {
    if (r.size() != cols) throw std::invalid_argument("ragged weight matrix");
    for (double w : r) wmax = std::max(wmax, w);
  }
  auto cost = [&](std::size_t i, std::size_t j) {
    return i < rows && j < cols ? wmax - weight[i][j] : wmax;
  };
  // Shortest augmenting path formulation, 1-based with a dummy column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> out(rows, -1);
  for (std::size_t j = 1; j <= n; ++j)
    if (match[j] && match[j] - 1 < rows && j - 1 < cols) out[match[j] - 1] = static_cast<int>(j - 1);
  return out;
}

namespace {

struct Labels {
  std::vector<std::pair<int, int>> pairs;  // (truth, decoded), both content
  std::size_t truth_total = 0;
  std::size_t decoded_total = 0;
};

void mapped_scores(const Labels& l, int nt, int nd, double& precision, double& recall, double& f1,
                   double& purity) {
  std::vector<std::vector<double>> table(static_cast<std::size_t>(nt),
                                         std::vector<double>(static_cast<std::size_t>(nd), 0.0));
  for (const auto& [t, d] : l.pairs) table[static_cast<std::size_t>(t)][static_cast<std::size_t>(d)] += 1.0;
  const auto assign = hungarian_max(table);
  double correct = 0.0;
  for (std::size_t t = 0; t < assign.size(); ++t)
    if (assign[t] >= 0) correct += table[t][static_cast<std::size_t>(assign[t])];
  precision = l.decoded_total ? correct / static_cast<double>(l.decoded_total) : 0.0;
  recall = l.truth_total ? correct / static_cast<double>(l.truth_total) : 1.0;
  f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  double pure = 0.0;
  for (int d = 0; d < nd; ++d) {
    double best = 0.0;
    for (int t = 0; t < nt; ++t) best = std::max(best, table[static_cast<std::size_t>(t)][static_cast<std::size_t>(d)]);
    pure += best;
  }
  purity = l.pairs.empty() ? 0.0 : pure / static_cast<double>(l.pairs.size());
}

}  // namespace

RecoveryScore recovery_score(const std::vector<Assignment>& truth, const Structure& ts,
                             const std::vector<Assignment>& decoded, const Structure& ds) {
  if (truth.size() != decoded.size()) throw std::invalid_argument("document counts differ");
  Labels slots, events;
  for (std::size_t d = 0; d < truth.size(); ++d) {
    const auto& tc = truth[d].clauses;
    const auto& dc = decoded[d].clauses;
    if (tc.size() != dc.size()) throw std::invalid_argument("clause counts differ");
    for (std::size_t i = 0; i < tc.size(); ++i) {
      if (tc[i].slots.size() != dc[i].slots.size()) throw std::invalid_argument("argument counts differ");
      const bool t_cnt = tc[i].state.bkg == Bkg::kCnt;
      const bool d_cnt = dc[i].state.bkg == Bkg::kCnt;
      events.truth_total += t_cnt;
      events.decoded_total += d_cnt;
      slots.truth_total += t_cnt * tc[i].slots.size();
      slots.decoded_total += d_cnt * dc[i].slots.size();
      if (!(t_cnt && d_cnt)) continue;
      events.pairs.emplace_back(ts.event_id(tc[i].state.frame, tc[i].state.event),
                                ds.event_id(dc[i].state.frame, dc[i].state.event));
      for (std::size_t j = 0; j < tc[i].slots.size(); ++j)
        slots.pairs.emplace_back(ts.slot_id(tc[i].state.frame, tc[i].slots[j]),
                                 ds.slot_id(dc[i].state.frame, dc[i].slots[j]));
    }
  }
  RecoveryScore r;
  mapped_scores(slots, ts.slot_offset(ts.num_frames()), ds.slot_offset(ds.num_frames()),
                r.slot_precision, r.slot_recall, r.slot_f1, r.slot_purity);
  double ep, er;
  mapped_scores(events, ts.content_events(), ds.content_events(), ep, er, r.event_f1, r.event_purity);
  return r;
}

}  // namespace frameind

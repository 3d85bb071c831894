#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "frameind/synth.hpp"
#include "test_support.hpp"

namespace frameind {
namespace {

using testing::Gen;

TEST(PlantedModelTest, NormalizedWithDisjointBlocks) {
  const Model m = planted_model({});
  const auto& p = m.params;
  EXPECT_LT(max_normalization_error(p), 1e-12);
  EXPECT_EQ(p.structure.num_frames(), 2);
  EXPECT_EQ(p.structure.num_events(0), 2);
  EXPECT_EQ(p.structure.num_slots(1), 3);
  for (int g = 0; g < p.structure.total_events(); ++g) {
    EXPECT_EQ(p.event_head(g)[0], 0.0);
    double own = 0.0;
    for (int i = 0; i < 4; ++i) own += p.event_head(g)[static_cast<std::size_t>(m.vocab.event_heads.id("ev" + std::to_string(g) + "_" + std::to_string(i)))];
    EXPECT_NEAR(own, 0.9, 1e-12);
  }
  EXPECT_THROW(planted_model({.num_frames = 0}), std::invalid_argument);
}

TEST(SampleTest, DeterministicUnderSeed) {
  const Model m = planted_model({});
  const auto a = sample_corpus(m, 20, {}, 5);
  const auto b = sample_corpus(m, 20, {}, 5);
  const auto c = sample_corpus(m, 20, {}, 6);
  std::ostringstream sa, sb, sc;
  write_corpus(sa, a.corpus);
  write_corpus(sb, b.corpus);
  write_corpus(sc, c.corpus);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_NE(sa.str(), sc.str());
  // A prefix of documents does not depend on how many are drawn.
  const auto shorter = sample_corpus(m, 5, {}, 5);
  for (std::size_t d = 0; d < 5; ++d)
    EXPECT_EQ(shorter.corpus.documents[d].clauses.size(), a.corpus.documents[d].clauses.size());
}

TEST(SampleTest, NoBackgroundWhenItsProbabilityIsZero) {
  const Model m = planted_model({.p_background = 0.0});
  const auto s = sample_corpus(m, 200, {}, 1);
  for (const auto& t : s.truth)
    for (const auto& c : t.clauses) EXPECT_EQ(c.state.bkg, Bkg::kCnt);
  const Model with = planted_model({.p_background = 0.5});
  std::size_t bkg = 0;
  for (const auto& t : sample_corpus(with, 50, {}, 1).truth)
    for (const auto& c : t.clauses) bkg += c.state.bkg == Bkg::kBkg;
  EXPECT_GT(bkg, 0u);
}

TEST(SampleTest, OneHotModelForcesThePath) {
  PlantedConfig cfg;
  cfg.num_frames = 1;
  cfg.words_per_event = 1;
  cfg.words_per_slot = 1;
  cfg.sharpness = 1.0;
  cfg.p_background = 0.0;
  cfg.beta = 1.0;
  Model m = planted_model(cfg);
  auto init = m.params.tables[Family::kEventInit].row(0);
  init[0] = 1.0;
  init[1] = 0.0;
  const SamplerConfig sc{5, 5, 0, 0};
  const auto s = sample_corpus(m, 10, sc, 3);
  std::ostringstream first;
  write_corpus(first, Corpus{{s.corpus.documents[0]}});
  for (std::size_t d = 0; d < 10; ++d) {
    const auto& doc = s.corpus.documents[d];
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_EQ(s.truth[d].clauses[i].state.event, static_cast<int>(i % 2));
      EXPECT_EQ(doc.clauses[i].event_head_lemma, "ev" + std::to_string(i % 2) + "_0");
    }
    auto renamed = doc;
    renamed.doc_id = s.corpus.documents[0].doc_id;
    for (auto& c : renamed.clauses) c.doc_id = renamed.doc_id;
    std::ostringstream out;
    write_corpus(out, Corpus{{renamed}});
    EXPECT_EQ(out.str(), first.str());
    EXPECT_NEAR(s.truth[d].log_joint, 0.0, 1e-12);
  }
  // With arguments, each slot is forced by its type.
  const auto with_args = sample_corpus(m, 10, {3, 3, 2, 2}, 4);
  for (std::size_t d = 0; d < 10; ++d)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        EXPECT_EQ(with_args.truth[d].clauses[i].slots[j],
                  static_cast<int>(with_args.indexed.documents[d].clauses[i].args[j].type) % 3);
}

TEST(SampleTest, TruthIsAValidPathWithMatchingScore) {
  const Model m = planted_model({.p_background = 0.3});
  const auto s = sample_corpus(m, 100, {}, 8);
  const auto& st = m.params.structure;
  for (std::size_t d = 0; d < s.truth.size(); ++d) {
    const auto& t = s.truth[d];
    std::vector<CollapsedState> path;
    for (std::size_t i = 0; i < t.clauses.size(); ++i) {
      const auto& c = t.clauses[i];
      path.push_back(c.state);
      if (i == 0) {
        EXPECT_EQ(c.state.bkg, Bkg::kCnt);
      }
      if (c.state.bkg == Bkg::kBkg) {
        EXPECT_EQ(c.state.frame, t.clauses[i - 1].state.frame);
        EXPECT_EQ(c.state.event, t.clauses[i - 1].state.event);
        EXPECT_GE(c.background_event, 0);
        EXPECT_LT(c.background_event, st.num_events(st.background_frame()));
      }
    }
    EXPECT_TRUE(std::isfinite(t.log_joint));
    EXPECT_NEAR(t.log_joint, path_log_score(m.params, s.indexed.documents[d], path), 1e-12);
  }
  // The indexed form agrees with the text under the generating vocabularies.
  const auto reindexed = index_corpus(s.corpus, m.vocab);
  for (std::size_t d = 0; d < s.indexed.documents.size(); ++d)
    for (std::size_t i = 0; i < s.indexed.documents[d].clauses.size(); ++i) {
      const auto& a = s.indexed.documents[d].clauses[i];
      const auto& b = reindexed.documents[d].clauses[i];
      EXPECT_EQ(a.head, b.head);
      for (std::size_t j = 0; j < a.args.size(); ++j) EXPECT_EQ(a.args[j].head, b.args[j].head);
    }
}

// Multinomial 3-sigma check of event-head frequencies per emitting event.
TEST(SampleTest, EventHeadFrequenciesMatchParameters) {
  const Model m = planted_model({.sharpness = 0.7, .p_background = 0.2});
  const auto& p = m.params;
  const int E = p.structure.total_events();
  const int V = p.sizes.event_heads;
  std::vector<std::vector<double>> counts(static_cast<std::size_t>(E), std::vector<double>(static_cast<std::size_t>(V)));
  std::size_t clauses = 0;
  std::uint64_t seed = 11;
  while (clauses < 100000) {
    const auto s = sample_corpus(m, 2000, {}, seed++);
    for (std::size_t d = 0; d < s.truth.size(); ++d)
      for (std::size_t i = 0; i < s.truth[d].clauses.size(); ++i) {
        const auto& c = s.truth[d].clauses[i];
        const int event = c.state.bkg == Bkg::kBkg
                              ? p.structure.event_id(p.structure.background_frame(), c.background_event)
                              : p.structure.event_id(c.state.frame, c.state.event);
        counts[static_cast<std::size_t>(event)][static_cast<std::size_t>(s.indexed.documents[d].clauses[i].head)] += 1.0;
        ++clauses;
      }
  }
  int violations = 0;
  for (int e = 0; e < E; ++e) {
    const auto& row = counts[static_cast<std::size_t>(e)];
    const double n = std::accumulate(row.begin(), row.end(), 0.0);
    ASSERT_GT(n, 1000.0);
    for (int w = 0; w < V; ++w) {
      const double q = p.event_head(e)[static_cast<std::size_t>(w)];
      const double sd = std::sqrt(n * q * (1.0 - q));
      if (std::abs(row[static_cast<std::size_t>(w)] - n * q) > 3.0 * sd + 1e-9) ++violations;
    }
  }
  EXPECT_EQ(violations, 0);
}

TEST(SampleTest, TextualModelDecodesTheWrittenCorpus) {
  const Model planted = planted_model({});
  const auto pc = sample_corpus(planted, 40, {}, 17);
  const Model text = textual_model(planted);
  EXPECT_LT(max_normalization_error(text.params), 1e-12);
  std::stringstream io;
  write_corpus(io, pc.corpus);
  const auto reread = index_corpus(parse_corpus(io, "synth"), text.vocab);
  for (std::size_t d = 0; d < pc.indexed.documents.size(); ++d) {
    const auto a = viterbi(planted.params, pc.indexed.documents[d]);
    const auto b = viterbi(text.params, reread.documents[d]);
    ASSERT_EQ(a.clauses.size(), b.clauses.size());
    std::size_t args = 0;
    for (std::size_t i = 0; i < a.clauses.size(); ++i) {
      EXPECT_EQ(a.clauses[i].state, b.clauses[i].state);
      EXPECT_EQ(a.clauses[i].slots, b.clauses[i].slots);
      args += a.clauses[i].slots.size();
    }
    // Each argument pays the same 1 / #heads factor.
    const double shift = static_cast<double>(args) * std::log(planted.vocab.event_heads.size() - 1.0);
    EXPECT_NEAR(a.log_joint - b.log_joint, shift, 1e-9);
  }
}

TEST(SampleTest, RejectsBadConfig) {
  const Model m = planted_model({});
  EXPECT_THROW(sample_corpus(m, 1, {3, 2, 0, 1}, 1), std::invalid_argument);
  EXPECT_THROW(sample_corpus(m, 1, {0, 2, 0, 1}, 1), std::invalid_argument);
}

TEST(SampleTest, TruthSidecarHasOneLinePerClause) {
  const Model m = planted_model({.p_background = 0.5});
  const auto s = sample_corpus(m, 5, {}, 2);
  std::ostringstream out;
  write_truth(out, s);
  std::istringstream in(out.str());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("slots"));
    if (j.at("bkg").get<bool>()) {
      EXPECT_TRUE(j.contains("background_event"));
    }
    ++lines;
  }
  EXPECT_EQ(lines, s.corpus.num_clauses());
}

double brute_best(const std::vector<std::vector<double>>& w) {
  const std::size_t rows = w.size(), cols = w.empty() ? 0 : w[0].size();
  const std::size_t n = std::max(rows, cols);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
      if (perm[i] < cols) s += w[i][perm[i]];
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

TEST(HungarianTest, MatchesBruteForceOnRandomMatrices) {
  Gen g(61);
  for (int trial = 0; trial < 300; ++trial) {
    const int r = g.between(1, 6), c = g.between(1, 6);
    std::vector<std::vector<double>> w(static_cast<std::size_t>(r), std::vector<double>(static_cast<std::size_t>(c)));
    for (auto& row : w)
      for (auto& x : row) x = trial % 2 ? static_cast<double>(g.between(0, 5)) : g.uniform(0.0, 10.0);
    const auto assign = hungarian_max(w);
    ASSERT_EQ(assign.size(), static_cast<std::size_t>(r));
    std::vector<int> used;
    double total = 0.0;
    for (int i = 0; i < r; ++i) {
      const int j = assign[static_cast<std::size_t>(i)];
      if (j < 0) continue;
      ASSERT_LT(j, c);
      EXPECT_EQ(std::count(used.begin(), used.end(), j), 0);
      used.push_back(j);
      total += w[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    EXPECT_NEAR(total, brute_best(w), 1e-9);
  }
  EXPECT_TRUE(hungarian_max({}).empty());
}

TEST(RecoveryTest, IdentityAndPermutationScoreOne) {
  const Model m = planted_model({.p_background = 0.2});
  const auto s = sample_corpus(m, 50, {}, 3);
  const auto& st = m.params.structure;
  const auto id = recovery_score(s.truth, st, s.truth, st);
  EXPECT_DOUBLE_EQ(id.slot_f1, 1.0);
  EXPECT_DOUBLE_EQ(id.event_f1, 1.0);
  EXPECT_DOUBLE_EQ(id.slot_purity, 1.0);

  // Swap the two frames and rotate slots within each frame.
  auto permuted = s.truth;
  for (auto& t : permuted)
    for (auto& c : t.clauses) {
      if (c.state.bkg == Bkg::kBkg) continue;
      c.state.frame = 1 - c.state.frame;
      c.state.event = 1 - c.state.event;
      for (auto& k : c.slots) k = (k + 1) % 3;
    }
  // BKG clauses carry the frozen nominal state, so permute those too.
  for (auto& t : permuted)
    for (std::size_t i = 0; i < t.clauses.size(); ++i)
      if (t.clauses[i].state.bkg == Bkg::kBkg) {
        t.clauses[i].state.frame = t.clauses[i - 1].state.frame;
        t.clauses[i].state.event = t.clauses[i - 1].state.event;
      }
  const auto pr = recovery_score(s.truth, st, permuted, st);
  EXPECT_DOUBLE_EQ(pr.slot_f1, 1.0);
  EXPECT_DOUBLE_EQ(pr.event_f1, 1.0);

  auto short_truth = s.truth;
  short_truth.pop_back();
  EXPECT_THROW(recovery_score(short_truth, st, s.truth, st), std::invalid_argument);
}

TEST(RecoveryTest, RandomLabelsScoreAboutOneOverK) {
  PlantedConfig cfg;
  cfg.num_frames = 1;
  cfg.events_per_frame = 1;
  cfg.slots_per_frame = 4;
  cfg.p_background = 0.0;
  const Model m = planted_model(cfg);
  const auto s = sample_corpus(m, 3000, {2, 8, 1, 3}, 4);
  Gen g(62);
  auto random = s.truth;
  for (auto& t : random)
    for (auto& c : t.clauses)
      for (auto& k : c.slots) k = g.between(0, 3);
  const auto r = recovery_score(s.truth, m.params.structure, random, m.params.structure);
  // Labels independent of the truth: any one-to-one mapping keeps about 1/k.
  EXPECT_GT(r.slot_f1, 0.25 - 0.02);
  EXPECT_LT(r.slot_f1, 0.25 + 0.02);
}

}  // namespace
}  // namespace frameind

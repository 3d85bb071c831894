#include <gtest/gtest.h>

#include <cmath>

#include "frameind/chain.hpp"
#include "frameind/error.hpp"
#include "frameind/logmath.hpp"
#include "test_support.hpp"

namespace frameind {
namespace {

using testing::Gen;

// Plain-probability clause emission for a single event.
double emission_prob(const ModelParams& p, int event, const IndexedClause& c) {
  const auto& s = p.structure;
  const int f = s.frame_of_event(event);
  double out = p.event_head(event)[static_cast<std::size_t>(c.head)];
  for (const auto& a : c.args) {
    double z = 0.0;
    for (int k = 0; k < s.num_slots(f); ++k) {
      const int slot = s.slot_id(f, k);
      z += p.slot_dist(event, a.type)[static_cast<std::size_t>(k)] *
           p.arg_head(slot)[static_cast<std::size_t>(a.head)] *
           p.arg_dep(slot)[static_cast<std::size_t>(a.caseframe)];
    }
    out *= z;
  }
  return out;
}

// One content frame with two events and no background: the chain reduces to
// an ordinary two-state HMM with P_E-INIT as the prior and P_E-TRAN as the
// transition matrix.
ModelParams two_state_hmm(Gen& g) {
  ModelParams p;
  p.structure = Structure({2, 1}, {2, 1});
  p.sizes = {3, 3, 2};
  p.beta = g.uniform(0.0, 0.9);
  p.tables = Tables::zeros(p.structure, p.sizes);
  for (auto& t : p.tables.family)
    for (std::size_t r = 0; r < t.rows(); ++r) testing::random_row(g, t.row(r), 0.0);
  auto bkg = p.tables[Family::kBackground].row(0);
  bkg[kCnt] = 1.0;
  bkg[kBkg] = 0.0;
  return p;
}

TEST(ChainTest, TwoStateHmmMatchesTextbookForwardBackward) {
  Gen g(101);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = two_state_hmm(g);
    const auto doc = testing::random_document(g, p.sizes, 6, 2);
    const std::size_t L = doc.clauses.size();
    std::vector<std::array<double, 2>> b(L), fwd(L), bwd(L);
    for (std::size_t i = 0; i < L; ++i)
      for (int e = 0; e < 2; ++e) b[i][static_cast<std::size_t>(e)] = emission_prob(p, e, doc.clauses[i]);
    const auto pi = p.event_init(0);
    for (int e = 0; e < 2; ++e) fwd[0][static_cast<std::size_t>(e)] = pi[static_cast<std::size_t>(e)] * b[0][static_cast<std::size_t>(e)];
    for (std::size_t i = 1; i < L; ++i)
      for (int e = 0; e < 2; ++e) {
        double acc = 0.0;
        for (int d = 0; d < 2; ++d) acc += fwd[i - 1][static_cast<std::size_t>(d)] * p.event_trans(d)[static_cast<std::size_t>(e)];
        fwd[i][static_cast<std::size_t>(e)] = acc * b[i][static_cast<std::size_t>(e)];
      }
    bwd[L - 1] = {1.0, 1.0};
    for (std::size_t i = L - 1; i-- > 0;)
      for (int d = 0; d < 2; ++d) {
        double acc = 0.0;
        for (int e = 0; e < 2; ++e)
          acc += p.event_trans(d)[static_cast<std::size_t>(e)] * b[i + 1][static_cast<std::size_t>(e)] * bwd[i + 1][static_cast<std::size_t>(e)];
        bwd[i][static_cast<std::size_t>(d)] = acc;
      }
    const double like = fwd[L - 1][0] + fwd[L - 1][1];

    const Trellis tr = forward_backward(p, doc);
    EXPECT_NEAR(tr.log_likelihood, std::log(like), 1e-10);
    for (std::size_t i = 0; i < L; ++i) {
      for (int e = 0; e < 2; ++e)
        EXPECT_NEAR(tr.posterior(i, e), fwd[i][static_cast<std::size_t>(e)] * bwd[i][static_cast<std::size_t>(e)] / like, 1e-10);
      EXPECT_EQ(tr.posterior(i, 2), 0.0);
      EXPECT_EQ(tr.posterior(i, 3), 0.0);
    }
  }
}

TEST(ChainTest, ForwardBackwardMatchesEnumerationOnRandomModels) {
  Gen g(7);
  int compared = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const auto p = testing::random_params(g, {2, 2, 2, 5, trial % 3 == 0 ? 0.2 : 0.0});
    const auto doc = testing::random_document(g, p.sizes, 4, 2);
    const double brute = brute_force_loglik(p, doc);
    if (brute == kNegInf) {
      EXPECT_THROW(forward_backward(p, doc), NumericError);
      continue;
    }
    EXPECT_NEAR(forward_backward(p, doc).log_likelihood, brute, 1e-8);
    ++compared;
  }
  EXPECT_GT(compared, 100);
}

TEST(ChainTest, PosteriorsSumToOneAndFirstClauseIsContent) {
  Gen g(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = testing::random_params(g);
    const auto doc = testing::random_document(g, p.sizes, 6, 3);
    const Trellis tr = forward_backward(p, doc);
    for (std::size_t i = 0; i < tr.length; ++i) {
      double z = 0.0;
      for (int s = 0; s < tr.states; ++s) z += tr.posterior(i, s);
      EXPECT_NEAR(z, 1.0, 1e-10);
    }
    const int G = p.structure.content_events();
    for (int s = G; s < tr.states; ++s) EXPECT_EQ(tr.posterior(0, s), 0.0);
  }
}

TEST(ChainTest, ViterbiMatchesExhaustiveSearch) {
  Gen g(9);
  for (int trial = 0; trial < 150; ++trial) {
    const auto p = testing::random_params(g, {2, 2, 2, 5, trial % 4 == 0 ? 0.2 : 0.0});
    const auto doc = testing::random_document(g, p.sizes, 4, 2);
    if (brute_force_loglik(p, doc) == kNegInf) {
      EXPECT_THROW(viterbi(p, doc), NumericError);
      continue;
    }
    const auto fast = viterbi(p, doc);
    const auto slow = exhaustive_viterbi(p, doc);
    EXPECT_NEAR(fast.log_joint, slow.log_joint, 1e-9);
    ASSERT_EQ(fast.clauses.size(), slow.clauses.size());
    for (std::size_t i = 0; i < fast.clauses.size(); ++i) {
      EXPECT_EQ(fast.clauses[i].state, slow.clauses[i].state) << "trial " << trial << " clause " << i;
      EXPECT_EQ(fast.clauses[i].background_event, slow.clauses[i].background_event);
      EXPECT_EQ(fast.clauses[i].slots, slow.clauses[i].slots);
    }
  }
}

TEST(ChainTest, ViterbiTiesGoToLowestStateIndex) {
  ModelParams p;
  p.structure = Structure({2, 1}, {1, 1});
  p.sizes = {2, 2, 2};
  p.tables = Tables::zeros(p.structure, p.sizes);
  for (auto& t : p.tables.family) {
    for (auto& x : t.data()) x = 1.0;
    normalize_rows(t);
  }
  // With beta = 0 and no background every frame sequence scores the same.
  p.beta = 0.0;
  p.tables[Family::kBackground].row(0)[kCnt] = 1.0;
  p.tables[Family::kBackground].row(0)[kBkg] = 0.0;
  IndexedDocument doc{"tie", {{1, {{ArgType::kSubj, 1, 0}}}, {0, {}}, {1, {}}}};
  const auto fast = viterbi(p, doc);
  const auto slow = exhaustive_viterbi(p, doc);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(fast.clauses[i].state, (CollapsedState{0, 0, Bkg::kCnt}));
    EXPECT_EQ(slow.clauses[i].state, fast.clauses[i].state);
  }
  EXPECT_EQ(fast.log_joint, slow.log_joint);
}

TEST(ChainTest, ViterbiScoreEqualsPathScore) {
  Gen g(10);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = testing::random_params(g, {3, 3, 3, 6, 0.0});
    const auto doc = testing::random_document(g, p.sizes, 10, 3);
    const auto a = viterbi(p, doc);
    std::vector<CollapsedState> path;
    for (const auto& c : a.clauses) path.push_back(c.state);
    EXPECT_NEAR(path_log_score(p, doc, path), a.log_joint, 1e-9);
    EXPECT_LE(a.log_joint, forward_backward(p, doc).log_likelihood + 1e-9);
  }
}

TEST(ChainTest, BackgroundStatesFreezeTheNominalState) {
  Gen g(12);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = testing::random_params(g, {3, 3, 2, 4, 0.0});
    const auto& s = p.structure;
    const int S = num_states(s);
    for (int a = 0; a < S; ++a) {
      const auto prev = state_at(s, a);
      EXPECT_EQ(state_index(s, prev), a);
      double total = 0.0;
      for (int b = 0; b < S; ++b) {
        const auto next = state_at(s, b);
        const double lp = transition_log_prob(p, prev, next);
        if (next.bkg == Bkg::kBkg && (next.frame != prev.frame || next.event != prev.event)) {
          EXPECT_EQ(lp, kNegInf);
        }
        total += std::exp(lp);
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(ChainTest, FactoredTransitionPiecesAgreeWithDirectFormula) {
  Gen g(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = testing::random_params(g, {3, 3, 2, 4, 0.0});
    const ChainModel m(p);
    const auto& s = p.structure;
    for (int a = 0; a < s.content_events(); ++a) {
      const auto prev = state_at(s, a);
      for (int b = 0; b < s.content_events(); ++b) {
        const auto next = state_at(s, b);
        const double factored =
            m.log_p_cnt() + (next.frame == prev.frame
                                 ? m.log_stick(prev.frame) + m.log_event_trans(a, next.event)
                                 : m.log_cross(prev.frame, next.frame) + m.log_event_init(b));
        EXPECT_NEAR(factored, transition_log_prob(p, prev, next), 1e-12);
      }
    }
  }
}

TEST(ChainTest, SingleClauseLikelihood) {
  Gen g(14);
  const auto p = testing::random_params(g);
  const auto doc = testing::random_document(g, p.sizes, 1, 2);
  double like = 0.0;
  const auto& s = p.structure;
  for (int f = 0; f < s.num_frames(); ++f)
    for (int e = 0; e < s.num_events(f); ++e)
      like += p.frame_init()[static_cast<std::size_t>(f)] * p.event_init(f)[static_cast<std::size_t>(e)] *
              emission_prob(p, s.event_id(f, e), doc.clauses[0]);
  EXPECT_NEAR(forward_backward(p, doc).log_likelihood, std::log(like), 1e-12);
}

TEST(ChainTest, ZeroProbabilityDocumentIsANumericError) {
  Gen g(15);
  auto p = two_state_hmm(g);
  auto& heads = p.tables[Family::kEventHead];
  for (std::size_t r = 0; r < heads.rows(); ++r) heads.row(r)[0] = 0.0;
  normalize_rows(heads);
  IndexedDocument doc{"z", {{1, {}}, {0, {}}}};
  EXPECT_THROW(forward_backward(p, doc), NumericError);
  EXPECT_THROW(viterbi(p, doc), NumericError);
  EXPECT_EQ(brute_force_loglik(p, doc), kNegInf);
  EXPECT_THROW(forward_backward(p, IndexedDocument{"empty", {}}), std::invalid_argument);
}

TEST(ChainTest, OracleRefusesLargeInputs) {
  Gen g(16);
  const auto p = testing::random_params(g, {2, 2, 2, 3, 0.0});
  const auto doc = testing::random_document(g, p.sizes, 40, 0, 40);
  EXPECT_THROW(brute_force_loglik(p, doc), std::length_error);
  EXPECT_THROW(exhaustive_viterbi(p, doc), std::length_error);
}

}  // namespace
}  // namespace frameind

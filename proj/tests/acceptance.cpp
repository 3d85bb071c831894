// One PASS/FAIL line per acceptance criterion; exits non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "frameind/chain.hpp"
#include "frameind/cli.hpp"
#include "frameind/evaluate.hpp"
#include "frameind/learn.hpp"
#include "frameind/logmath.hpp"
#include "frameind/synth.hpp"
#include "test_support.hpp"

namespace frameind {
namespace {

using testing::Gen;
using Clock = std::chrono::steady_clock;

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

void oracle_equivalence() {
  const auto t0 = Clock::now();
  Gen g(2024);
  double worst = 0.0;
  int path_mismatch = 0, docs = 0;
  for (int model = 0; model < 50; ++model) {
    ModelParams p = testing::random_params(g, {2, 2, 2, 5, 0.0});
    // Keep the background switch strictly inside (0, 1).
    auto bkg = p.tables[Family::kBackground].row(0);
    bkg[kBkg] = g.uniform(0.05, 0.5);
    bkg[kCnt] = 1.0 - bkg[kBkg];
    for (int d = 0; d < 20; ++d) {
      const auto doc = testing::random_document(g, p.sizes, 4, 2);
      worst = std::max(worst, std::abs(forward_backward(p, doc).log_likelihood - brute_force_loglik(p, doc)));
      const auto fast = viterbi(p, doc);
      const auto slow = exhaustive_viterbi(p, doc);
      for (std::size_t i = 0; i < fast.clauses.size(); ++i)
        if (!(fast.clauses[i].state == slow.clauses[i].state)) {
          ++path_mismatch;
          break;
        }
      ++docs;
    }
  }
  const double secs = seconds_since(t0);
  report("oracle-equivalence", worst < 1e-8 && path_mismatch == 0 && secs < 60.0,
         fmt("50 models, %.0f docs, max |dloglik| = %.2e (tol 1e-8), viterbi mismatches = %.0f, %.2f s (limit 60)",
             docs, worst, path_mismatch, secs));
}

PlantedCorpus planted_corpus(int docs, std::uint64_t seed) {
  return sample_corpus(planted_model({}), docs, {}, seed);
}

struct Indexed {
  Vocabularies vocab;
  IndexedCorpus corpus;
};

Indexed reindex(const Corpus& c) {
  Indexed out;
  out.vocab = build_vocab(c, 1);
  out.corpus = index_corpus(c, out.vocab);
  return out;
}

void em_monotonicity() {
  const auto pc = planted_corpus(100, 11);
  const auto ix = reindex(pc.corpus);
  const auto init = init_model(Structure::initial(2), VocabSizes::of(ix.vocab), 3, 0.01);
  const auto r = batch_em(init, ix.corpus, 30);
  double worst = 0.0;
  for (std::size_t i = 1; i < r.trace.size(); ++i) worst = std::max(worst, r.trace[i - 1] - r.trace[i]);
  report("map-em-monotonicity", worst <= 1e-9,
         fmt("30 iterations on 100 docs, penalized %.3f -> %.3f, largest decrease %.2e (tol 1e-9)",
             r.trace.front(), r.trace.back(), worst));
}

void split_neutrality() {
  const auto pc = planted_corpus(100, 12);
  const auto ix = reindex(pc.corpus);
  auto p = init_model(Structure::initial(2), VocabSizes::of(ix.vocab), 4, 0.01);
  p = batch_em(p, ix.corpus, 5).params;
  const double before = corpus_loglik(p, ix.corpus);
  const auto sp = split_all(p, 0.0, 1);
  const double after = corpus_loglik(sp.params, ix.corpus);
  const auto perturbed = split_all(p, 0.01, 2);
  const auto cands = score_merges(perturbed.params, perturbed.record, ix.corpus);
  const auto merged = merge_back(perturbed.params, cands, 1.0);
  const bool restored = merged.structure == p.structure;
  report("split-neutrality", std::abs(after - before) < 1e-8 && restored,
         fmt("|dloglik| after eps=0 split = %.2e (tol 1e-8); merge fraction 1 restores sizes: ",
             std::abs(after - before)) +
             (restored ? "yes" : "no"));
}

void planted_recovery() {
  const auto t0 = Clock::now();
  const auto pc = planted_corpus(200, 7);
  const auto ix = reindex(pc.corpus);
  double best = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TrainSchedule s;
    s.cycles = 3;
    s.seed = seed;
    const auto r = train(Structure::initial(2), VocabSizes::of(ix.vocab), ix.corpus, s);
    const auto d = decode_corpus(r.params, pc.corpus, ix.corpus);
    const auto sc = recovery_score(pc.truth, pc.params.structure, d.assignments, r.params.structure);
    best = std::max(best, sc.slot_f1);
    per_seed += fmt(" %.3f", sc.slot_f1);
  }
  report("planted-recovery", best >= 0.7,
         fmt("200 docs, cycles=3, best slot F1 = %.3f (threshold 0.7), %.1f s; per seed:", best,
             seconds_since(t0)) +
             per_seed);
}

void transition_constraints() {
  Gen g(606);
  int cases = 0, violations = 0;
  while (cases < 10000) {
    const auto p = testing::random_params(g, {3, 3, 2, 3, 0.1});
    const auto& s = p.structure;
    const int S = num_states(s);
    for (int k = 0; k < 20 && cases < 10000; ++k, ++cases) {
      const auto prev = state_at(s, g.between(0, S - 1));
      double total = 0.0;
      bool bad = false;
      for (int b = 0; b < S; ++b) {
        const auto next = state_at(s, b);
        const double lp = transition_log_prob(p, prev, next);
        if (next.bkg == Bkg::kBkg && (next.frame != prev.frame || next.event != prev.event) && lp != kNegInf)
          bad = true;
        total += std::exp(lp);
      }
      if (bad || std::abs(total - 1.0) > 1e-12) ++violations;
    }
  }
  report("transition-constraints", violations == 0,
         fmt("%.0f random (params, previous state) cases, %.0f violations of row normalization or BKG freezing",
             cases, violations));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void table_shape() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "frameind_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto path = [&](const char* n) { return (dir / n).string(); };
  std::ostringstream out, err;
  auto run = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "frameind");
    return run_cli(args, out, err);
  };
  bool ok = run({"synth", "--docs", "150", "--seed", "21", "--output", path("corpus.jsonl"), "--gold",
                 path("gold.jsonl")}) == 0;
  ok = ok && run({"train", "--corpus", path("corpus.jsonl"), "--model", path("model.json"), "--cycles", "2",
                  "--workers", "1"}) == 0;
  ok = ok && run({"decode", "--model", path("model.json"), "--corpus", path("corpus.jsonl"), "--output",
                  path("entities.jsonl")}) == 0;
  ok = ok && run({"classify", "--model", path("model.json"), "--corpus", path("corpus.jsonl"),
                  "--avg-threshold", "0.01", "--output", path("labels.jsonl")}) == 0;
  std::string rows;
  struct Variant {
    const char* name;
    const char* n;
    bool doc_labels;
  };
  for (const Variant v : {Variant{"1-to-1", "1", false}, Variant{"1-to-1 +doc", "1", true},
                          Variant{"5-to-1", "5", false}}) {
    std::vector<std::string> args = {"evaluate", "--entities", path("entities.jsonl"), "--gold",
                                     path("gold.jsonl"), "--n-to-one", v.n, "--json", path("score.json")};
    if (v.doc_labels) {
      args.push_back("--doc-labels");
      args.push_back(path("labels.jsonl"));
    }
    ok = ok && run(args) == 0;
    if (!ok) break;
    const auto j = nlohmann::json::parse(slurp(path("score.json")));
    const auto& o = j.at("overall");
    ok = ok && o.contains("precision") && o.contains("recall") && o.contains("f1") && !j.at("slots").empty();
    rows += std::string("; ") + v.name +
            fmt(" P/R/F1 = %.1f/%.1f/%.1f", 100.0 * o.at("precision").get<double>(),
                100.0 * o.at("recall").get<double>(), 100.0 * o.at("f1").get<double>());
  }
  fs::remove_all(dir);
  report("table-shape-report", ok,
         std::string("synth -> train -> decode -> classify -> evaluate on the synthetic fixture") + rows +
             " (published MUC-4: 32/37/34, +doc 41/44/43; TAC 1-to-1 24/25/24, 5-to-1 21/38/27; comparison only)" +
             (ok ? "" : "; stderr: " + err.str()));
}

ExtractedEntity pred(const char* doc, int slot, const char* head, int clause) {
  ExtractedEntity e;
  e.doc_id = doc;
  e.slot = slot;
  e.head_lemma = head;
  e.clause_index = clause;
  return e;
}

void evaluator_fixtures() {
  const std::vector<GoldEntity> gold = {{"d1", "Perp", "Guerrillas", false, "attack"},
                                        {"d1", "Target", "embassy", false, "attack"},
                                        {"d2", "Perp", "soldiers", false, "attack"},
                                        {"d2", "Target", "bridge", true, "attack"}};
  const std::vector<ExtractedEntity> preds = {pred("d1", 0, "guerrillas", 0), pred("d1", 1, "embassy", 1),
                                              pred("d1", 1, "town", 2),       pred("d2", 2, "soldiers", 0),
                                              pred("d2", 1, "bridge", 1),     pred("d2", 0, "guerrillas", 2)};
  const auto one = score(preds, gold, fit_mapping(preds, gold, 1)).overall;
  const auto five = score(preds, gold, fit_mapping(preds, gold, 5)).overall;
  // Hand counts: N=1 maps Perp->{2}, Target->{1}: 3 of 4 predictions correct,
  // 2 of 3 required golds (bridge is optional). N=5 adds slot 0 to Perp.
  bool ok = one.predicted == 4 && one.correct_predictions == 3 && one.gold == 3 && one.recalled == 2;
  ok = ok && five.predicted == 6 && five.correct_predictions == 4 && five.gold == 3 && five.recalled == 3;
  ok = ok && five.f1() >= one.f1();
  const std::vector<GoldEntity> optional_only = {{"d", "Org", "fmln", true, ""}};
  const auto empty = score({}, optional_only, fit_mapping({}, optional_only, 1)).overall;
  ok = ok && empty.recall() == 1.0 && empty.f1() == 0.0;
  report("evaluator-fixtures", ok,
         fmt("N=1 P/R/F1 = %.4f/%.4f/%.4f (hand 0.7500/0.6667/0.7059); N=5 F1 = %.4f (hand 0.8000)",
             one.precision(), one.recall(), one.f1(), five.f1()));
}

}  // namespace
}  // namespace frameind

int main() {
  using namespace frameind;
  oracle_equivalence();
  em_monotonicity();
  split_neutrality();
  planted_recovery();
  transition_constraints();
  table_shape();
  evaluator_fixtures();
  std::printf("%d of 7 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

#include "frameind/cli.hpp"

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "frameind/error.hpp"
#include "frameind/evaluate.hpp"
#include "frameind/extract.hpp"
#include "frameind/learn.hpp"
#include "frameind/synth.hpp"

namespace frameind {

using nlohmann::json;

namespace {

struct TrainOptions {
  std::string corpus, model, report;
  int frames = 2;
  int bkg_events = 1;
  int bkg_slots = 2;
  std::uint64_t min_count = 1;
  TrainSchedule schedule;
  std::string mode = "incremental";
  std::string merge_scoring = "approximate";
  double beta = 0.5;
  double alpha = 0.1;
  bool report_timing = false;
};

struct DecodeOptions {
  std::string model, corpus, output;
  bool include_background = false;
};

struct ClassifyOptions {
  std::string model, corpus, output;
  double avg_threshold = 0.0;
  double trigger_threshold = kDefaultTriggerThreshold;
};

struct EvaluateOptions {
  std::string entities, gold, dev_gold, dev_docs, doc_labels, output, json_output;
  int n_to_one = 1;
};

struct InspectOptions {
  std::string model, output;
  int top_k = 5;
  bool as_json = false;
};

struct SynthOptions {
  std::string output, truth, gold, model;
  int docs = 200;
  PlantedConfig planted;
  SamplerConfig sampler;
  std::uint64_t seed = 1;
};

int default_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n ? static_cast<int>(n) : 1;
}

// Writes to `path`, or to `fallback` when the path is empty.
void emit(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f << text;
  if (!f.flush()) throw DataError("failed writing '" + path + "'");
}

std::set<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.insert(line);
  return out;
}

json train_config(const TrainOptions& o) {
  const auto& s = o.schedule;
  return {{"subcommand", "train"},
          {"corpus", o.corpus},
          {"model", o.model},
          {"frames", o.frames},
          {"bkg_events", o.bkg_events},
          {"bkg_slots", o.bkg_slots},
          {"min_count", o.min_count},
          {"cycles", s.cycles},
          {"em_iters", s.em_iters_per_cycle},
          {"post_merge_iters", s.post_merge_iters},
          {"merge_fraction", s.merge_fraction},
          {"perturb_eps", s.perturb_eps},
          {"mode", o.mode},
          {"merge_scoring", o.merge_scoring},
          {"init_jitter", s.init_jitter},
          {"seed", s.seed},
          {"workers", s.workers},
          {"beta", o.beta},
          {"alpha", o.alpha}};
}

void do_train(TrainOptions o, std::ostream& out) {
  o.schedule.mode = o.mode == "batch" ? EmMode::kBatch : EmMode::kIncremental;
  o.schedule.merge_scoring = o.merge_scoring == "exact" ? MergeScoring::kExact : MergeScoring::kApproximate;
  if (o.frames < 1) throw std::invalid_argument("--frames must be positive");

  const Corpus corpus = load_corpus(o.corpus);
  if (corpus.documents.empty()) throw DataError("corpus '" + o.corpus + "' has no documents");
  Model model;
  model.vocab = build_vocab(corpus, o.min_count);
  const IndexedCorpus indexed = index_corpus(corpus, model.vocab);
  const auto result = train(Structure::initial(o.frames, o.bkg_events, o.bkg_slots),
                            VocabSizes::of(model.vocab), indexed, o.schedule, o.beta, Smoothing(o.alpha));
  model.params = result.params;
  model.metadata = {{"config", train_config(o)}};

  json report = {{"config", train_config(o)}, {"stages", result.report.to_json(o.report_timing)}};
  save_model(model, o.model);
  const std::string report_path = o.report.empty() ? o.model + ".report.json" : o.report;
  emit(report_path, report.dump(2) + "\n", out);
}

void do_decode(const DecodeOptions& o, std::ostream& out) {
  const Model model = load_model(o.model);
  const Corpus corpus = load_corpus(o.corpus);
  const auto result = decode_corpus(model, corpus);
  std::ostringstream os;
  write_entities(os, o.include_background ? result.all : result.entities);
  emit(o.output, os.str(), out);
}

void do_classify(const ClassifyOptions& o, std::ostream& out) {
  const Model model = load_model(o.model);
  const Corpus corpus = load_corpus(o.corpus);
  const auto labels = classify_corpus(model, corpus, o.avg_threshold, o.trigger_threshold);
  std::ostringstream os;
  for (std::size_t d = 0; d < labels.size(); ++d)
    os << json{{"doc_id", corpus.documents[d].doc_id}, {"frames", labels[d]}}.dump() << '\n';
  emit(o.output, os.str(), out);
}

// doc_id -> frames from a classify output file.
std::map<std::string, std::set<int>> load_doc_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::map<std::string, std::set<int>> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(text);
      auto& frames = out[j.at("doc_id").get<std::string>()];
      for (const auto& f : j.at("frames")) frames.insert(f.get<int>());
    } catch (const json::exception& e) {
      throw ParseError(path, line, e.what());
    }
  }
  return out;
}

void do_evaluate(const EvaluateOptions& o, std::ostream& out) {
  if (o.n_to_one < 1) throw std::invalid_argument("--n-to-one must be at least 1");
  auto predictions = load_entities(o.entities);
  if (!o.doc_labels.empty()) {
    const auto labels = load_doc_labels(o.doc_labels);
    std::erase_if(predictions, [&](const ExtractedEntity& e) {
      auto it = labels.find(e.doc_id);
      return it == labels.end() || !it->second.contains(e.frame);
    });
  }
  const auto test_gold = load_gold(o.gold);
  std::vector<ExtractedEntity> dev_preds, test_preds;
  std::vector<GoldEntity> dev_gold;
  if (o.dev_gold.empty()) {
    dev_preds = test_preds = predictions;
    dev_gold = test_gold;
  } else {
    dev_gold = load_gold(o.dev_gold);
    std::set<std::string> dev_docs;
    if (o.dev_docs.empty()) {
      for (const auto& g : dev_gold) dev_docs.insert(g.doc_id);
    } else {
      dev_docs = read_lines(o.dev_docs);
    }
    for (const auto& p : predictions) (dev_docs.contains(p.doc_id) ? dev_preds : test_preds).push_back(p);
  }
  const SlotMapping mapping = fit_mapping(dev_preds, dev_gold, o.n_to_one);
  const ScoreReport report = score(test_preds, test_gold, mapping);
  if (!o.json_output.empty()) {
    json j = report.to_json();
    j["mapping"] = mapping_to_json(mapping);
    j["config"] = {{"subcommand", "evaluate"}, {"entities", o.entities},   {"gold", o.gold},
                   {"dev_gold", o.dev_gold},   {"dev_docs", o.dev_docs},   {"doc_labels", o.doc_labels},
                   {"n_to_one", o.n_to_one}};
    emit(o.json_output, j.dump(2) + "\n", out);
  }
  emit(o.output, report.to_text(), out);
}

void do_inspect(const InspectOptions& o, std::ostream& out) {
  const Model model = load_model(o.model);
  const FrameReport report = dump_frames(model, o.top_k);
  emit(o.output, o.as_json ? report.to_json().dump(2) + "\n" : report.to_text(), out);
}

void do_synth(const SynthOptions& o, std::ostream& out) {
  const Model model = planted_model(o.planted);
  const PlantedCorpus planted = sample_corpus(model, o.docs, o.sampler, o.seed);
  std::ostringstream corpus_text;
  write_corpus(corpus_text, planted.corpus);
  emit(o.output, corpus_text.str(), out);
  if (!o.truth.empty()) {
    std::ostringstream os;
    write_truth(os, planted);
    emit(o.truth, os.str(), out);
  }
  if (!o.gold.empty()) {
    std::ostringstream os;
    const auto& s = planted.params.structure;
    for (std::size_t d = 0; d < planted.truth.size(); ++d) {
      const auto& doc = planted.corpus.documents[d];
      for (std::size_t i = 0; i < doc.clauses.size(); ++i) {
        const auto& ca = planted.truth[d].clauses[i];
        if (ca.state.bkg == Bkg::kBkg) continue;
        for (std::size_t j = 0; j < ca.slots.size(); ++j) {
          const int id = s.slot_id(ca.state.frame, ca.slots[j]);
          os << json{{"doc_id", doc.doc_id},
                     {"gold_slot", "slot" + std::to_string(id)},
                     {"head_lemma", doc.clauses[i].args[j].head_lemma},
                     {"optional", false},
                     {"template", "frame" + std::to_string(ca.state.frame)}}
                    .dump()
             << '\n';
        }
      }
    }
    emit(o.gold, os.str(), out);
  }
  if (!o.model.empty()) save_model(textual_model(model), o.model);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised frame induction: train, decode, classify, evaluate, inspect, synth"};
  app.set_config("--config", "", "TOML/INI file with option defaults; command-line flags win");
  app.require_subcommand(1);

  TrainOptions tr;
  tr.schedule.workers = default_workers();
  auto* train_cmd = app.add_subcommand("train", "Learn a model from a clause corpus");
  train_cmd->add_option("--corpus", tr.corpus, "Clause corpus (JSONL)")->required();
  train_cmd->add_option("--model", tr.model, "Output model file")->required();
  train_cmd->add_option("--report", tr.report, "Training report path (default: <model>.report.json)");
  train_cmd->add_option("--frames", tr.frames, "Number of content frames")->capture_default_str();
  train_cmd->add_option("--bkg-events", tr.bkg_events)->capture_default_str();
  train_cmd->add_option("--bkg-slots", tr.bkg_slots)->capture_default_str();
  train_cmd->add_option("--min-count", tr.min_count, "Vocabulary count threshold")->capture_default_str();
  train_cmd->add_option("--cycles", tr.schedule.cycles)->capture_default_str();
  train_cmd->add_option("--em-iters", tr.schedule.em_iters_per_cycle)->capture_default_str();
  train_cmd->add_option("--post-merge-iters", tr.schedule.post_merge_iters)->capture_default_str();
  train_cmd->add_option("--merge-fraction", tr.schedule.merge_fraction)->capture_default_str();
  train_cmd->add_option("--perturb", tr.schedule.perturb_eps)->capture_default_str();
  train_cmd->add_option("--init-jitter", tr.schedule.init_jitter)->capture_default_str();
  train_cmd->add_option("--mode", tr.mode)->check(CLI::IsMember({"batch", "incremental"}))->capture_default_str();
  train_cmd->add_option("--merge-scoring", tr.merge_scoring)
      ->check(CLI::IsMember({"approximate", "exact"}))
      ->capture_default_str();
  train_cmd->add_option("--beta", tr.beta, "Frame stickiness")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  train_cmd->add_option("--alpha", tr.alpha, "Dirichlet smoothing")->capture_default_str();
  train_cmd->add_option("--seed", tr.schedule.seed)->capture_default_str();
  train_cmd->add_option("--workers", tr.schedule.workers)->check(CLI::PositiveNumber);
  train_cmd->add_flag("--report-timing", tr.report_timing, "Include wall-clock time per stage");

  DecodeOptions de;
  auto* decode_cmd = app.add_subcommand("decode", "Extract entities with Viterbi decoding");
  decode_cmd->add_option("--model", de.model)->required();
  decode_cmd->add_option("--corpus", de.corpus)->required();
  decode_cmd->add_option("--output", de.output, "Entity file (default: stdout)");
  decode_cmd->add_flag("--include-background", de.include_background);

  ClassifyOptions cl;
  auto* classify_cmd = app.add_subcommand("classify", "Assign documents to frames");
  classify_cmd->add_option("--model", cl.model)->required();
  classify_cmd->add_option("--corpus", cl.corpus)->required();
  classify_cmd->add_option("--avg-threshold", cl.avg_threshold)->required();
  classify_cmd->add_option("--trigger-threshold", cl.trigger_threshold)->capture_default_str();
  classify_cmd->add_option("--output", cl.output);

  EvaluateOptions ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score extracted entities against gold");
  evaluate_cmd->add_option("--entities", ev.entities)->required();
  evaluate_cmd->add_option("--gold", ev.gold, "Gold entities scored against")->required();
  evaluate_cmd->add_option("--dev-gold", ev.dev_gold, "Gold entities used to fit the slot mapping");
  evaluate_cmd->add_option("--dev-docs", ev.dev_docs, "Development document ids, one per line");
  evaluate_cmd->add_option("--doc-labels", ev.doc_labels, "classify output; keeps entities of matching frames");
  evaluate_cmd->add_option("--n-to-one", ev.n_to_one)->capture_default_str();
  evaluate_cmd->add_option("--output", ev.output);
  evaluate_cmd->add_option("--json", ev.json_output, "Structured report path");

  InspectOptions in;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print the most probable emissions of each frame");
  inspect_cmd->add_option("--model", in.model)->required();
  inspect_cmd->add_option("--top-k", in.top_k)->check(CLI::PositiveNumber)->capture_default_str();
  inspect_cmd->add_option("--output", in.output);
  inspect_cmd->add_flag("--json", in.as_json);

  SynthOptions sy;
  auto* synth_cmd = app.add_subcommand("synth", "Sample a corpus from a planted model");
  synth_cmd->add_option("--output", sy.output, "Corpus file (default: stdout)");
  synth_cmd->add_option("--truth", sy.truth);
  synth_cmd->add_option("--gold", sy.gold, "Planted slots in the gold entity format");
  synth_cmd->add_option("--model", sy.model, "Write the generating model");
  synth_cmd->add_option("--docs", sy.docs)->capture_default_str();
  synth_cmd->add_option("--frames", sy.planted.num_frames)->capture_default_str();
  synth_cmd->add_option("--events", sy.planted.events_per_frame)->capture_default_str();
  synth_cmd->add_option("--slots", sy.planted.slots_per_frame)->capture_default_str();
  synth_cmd->add_option("--sharpness", sy.planted.sharpness)->capture_default_str();
  synth_cmd->add_option("--p-bkg", sy.planted.p_background)->capture_default_str();
  synth_cmd->add_option("--beta", sy.planted.beta)->capture_default_str();
  synth_cmd->add_option("--seed", sy.seed)->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*train_cmd) do_train(tr, out);
    if (*decode_cmd) do_decode(de, out);
    if (*classify_cmd) do_classify(cl, out);
    if (*evaluate_cmd) do_evaluate(ev, out);
    if (*inspect_cmd) do_inspect(in, out);
    if (*synth_cmd) do_synth(sy, out);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace frameind

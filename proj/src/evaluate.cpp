#include "frameind/evaluate.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <tuple>

namespace frameind {

using nlohmann::json;

std::vector<GoldEntity> parse_gold(std::istream& in, const std::string& source) {
  std::vector<GoldEntity> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(text);
      GoldEntity g;
      g.doc_id = j.at("doc_id").get<std::string>();
      g.gold_slot = j.at("gold_slot").get<std::string>();
      g.head_lemma = j.at("head_lemma").get<std::string>();
      g.optional = j.value("optional", false);
      g.template_name = j.value("template", std::string());
      if (g.doc_id.empty() || g.gold_slot.empty() || g.head_lemma.empty())
        throw ParseError(source, line, "doc_id, gold_slot and head_lemma must be non-empty");
      out.push_back(std::move(g));
    } catch (const json::exception& e) {
      throw ParseError(source, line, e.what());
    }
  }
  return out;
}

std::vector<GoldEntity> load_gold(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open gold file '" + path + "'");
  return parse_gold(in, path);
}

std::string case_fold(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool match(const ExtractedEntity& predicted, const GoldEntity& gold) {
  return predicted.doc_id == gold.doc_id && case_fold(predicted.head_lemma) == case_fold(gold.head_lemma);
}

double Prf::precision() const {
  return predicted == 0 ? 0.0 : static_cast<double>(correct_predictions) / static_cast<double>(predicted);
}

double Prf::recall() const {
  return gold == 0 ? 1.0 : static_cast<double>(recalled) / static_cast<double>(gold);
}

double Prf::f1() const {
  const double p = precision(), r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

Prf& Prf::operator+=(const Prf& o) {
  predicted += o.predicted;
  correct_predictions += o.correct_predictions;
  gold += o.gold;
  recalled += o.recalled;
  return *this;
}

namespace {

std::vector<ExtractedEntity> dedupe(const std::vector<ExtractedEntity>& preds) {
  std::vector<ExtractedEntity> out;
  std::set<std::tuple<std::string, int, int, int, int>> seen;
  for (const auto& p : preds) {
    if (p.background) continue;
    if (seen.emplace(p.doc_id, p.frame, p.slot, p.clause_index, p.arg_index).second) out.push_back(p);
  }
  return out;
}

// Per gold slot and induced slot: predictions, correct predictions and the
// set of non-optional golds they recall.
struct Contribution {
  std::size_t predicted = 0;
  std::size_t correct = 0;
  std::set<std::size_t> recalled;
};

struct GoldSlotData {
  std::size_t required = 0;
  std::map<InducedSlot, Contribution> by_induced;
};

std::map<std::string, GoldSlotData> tabulate(const std::vector<ExtractedEntity>& preds,
                                             const std::vector<GoldEntity>& gold) {
  std::map<std::string, GoldSlotData> out;
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> index;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto& d = out[gold[i].gold_slot];
    if (!gold[i].optional) ++d.required;
    index[{gold[i].doc_id, case_fold(gold[i].head_lemma)}].push_back(i);
  }
  for (auto& [name, data] : out) {
    for (const auto& p : preds) {
      auto& c = data.by_induced[{p.frame, p.slot}];
      ++c.predicted;
      auto it = index.find({p.doc_id, case_fold(p.head_lemma)});
      if (it == index.end()) continue;
      bool hit = false;
      for (std::size_t g : it->second) {
        if (gold[g].gold_slot != name) continue;
        hit = true;
        if (!gold[g].optional) c.recalled.insert(g);
      }
      if (hit) ++c.correct;
    }
  }
  return out;
}

Prf combine(const GoldSlotData& data, const std::vector<InducedSlot>& chosen) {
  Prf r;
  r.gold = data.required;
  std::set<std::size_t> recalled;
  for (const auto& s : chosen) {
    auto it = data.by_induced.find(s);
    if (it == data.by_induced.end()) continue;
    r.predicted += it->second.predicted;
    r.correct_predictions += it->second.correct;
    recalled.insert(it->second.recalled.begin(), it->second.recalled.end());
  }
  r.recalled = recalled.size();
  return r;
}

}  // namespace

SlotMapping fit_mapping(const std::vector<ExtractedEntity>& predictions,
                        const std::vector<GoldEntity>& gold, int n) {
  if (n < 1) throw std::invalid_argument("N must be at least 1");
  SlotMapping m;
  m.n = n;
  const auto table = tabulate(dedupe(predictions), gold);
  for (const auto& [name, data] : table) {
    std::vector<InducedSlot> chosen;
    double best_f1 = combine(data, chosen).f1();
    while (static_cast<int>(chosen.size()) < n) {
      const InducedSlot* best = nullptr;
      double best_gain = best_f1;
      for (const auto& [slot, c] : data.by_induced) {
        if (std::find(chosen.begin(), chosen.end(), slot) != chosen.end()) continue;
        auto trial = chosen;
        trial.push_back(slot);
        const double f = combine(data, trial).f1();
        if (f > best_gain) {
          best_gain = f;
          best = &slot;
        }
      }
      if (!best) break;
      chosen.push_back(*best);
      best_f1 = best_gain;
    }
    m.slots[name] = std::move(chosen);
  }
  return m;
}

ScoreReport score(const std::vector<ExtractedEntity>& predictions,
                  const std::vector<GoldEntity>& gold, const SlotMapping& mapping) {
  const auto table = tabulate(dedupe(predictions), gold);
  ScoreReport r;
  for (const auto& [name, data] : table) {
    auto it = mapping.slots.find(name);
    const Prf prf = combine(data, it == mapping.slots.end() ? std::vector<InducedSlot>{} : it->second);
    r.rows.push_back({name, prf});
    r.overall += prf;
  }
  return r;
}

std::string ScoreReport::to_text() const {
  std::ostringstream os;
  std::size_t width = 7;
  for (const auto& row : rows) width = std::max(width, row.slot.size());
  auto line = [&](const std::string& name, const Prf& p) {
    os << std::left << std::setw(static_cast<int>(width)) << name << std::right << std::fixed
       << std::setprecision(1) << std::setw(8) << 100.0 * p.precision() << std::setw(8)
       << 100.0 * p.recall() << std::setw(8) << 100.0 * p.f1() << '\n';
  };
  os << std::left << std::setw(static_cast<int>(width)) << "slot" << std::right << std::setw(8) << "P"
     << std::setw(8) << "R" << std::setw(8) << "F1" << '\n';
  for (const auto& row : rows) line(row.slot, row.counts);
  line("overall", overall);
  return os.str();
}

namespace {

json prf_json(const Prf& p) {
  return {{"precision", p.precision()}, {"recall", p.recall()},     {"f1", p.f1()},
          {"predicted", p.predicted},   {"correct", p.correct_predictions},
          {"gold", p.gold},             {"recalled", p.recalled}};
}

}  // namespace

json ScoreReport::to_json() const {
  json out = {{"slots", json::array()}, {"overall", prf_json(overall)}};
  for (const auto& row : rows) {
    json j = prf_json(row.counts);
    j["slot"] = row.slot;
    out["slots"].push_back(std::move(j));
  }
  return out;
}

json mapping_to_json(const SlotMapping& mapping) {
  json out = {{"n", mapping.n}, {"slots", json::object()}};
  for (const auto& [name, chosen] : mapping.slots) {
    json a = json::array();
    for (const auto& [f, s] : chosen) a.push_back({{"frame", f}, {"slot", s}});
    out["slots"][name] = std::move(a);
  }
  return out;
}

}  // namespace frameind

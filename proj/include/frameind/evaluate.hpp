#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "frameind/extract.hpp"
#include "json.hpp"

namespace frameind {

struct GoldEntity {
  std::string doc_id;
  std::string gold_slot;
  std::string head_lemma;
  bool optional = false;
  std::string template_name;  // kept for reference, never scored
};

std::vector<GoldEntity> parse_gold(std::istream& in, const std::string& source = "<stream>");
std::vector<GoldEntity> load_gold(const std::string& path);

std::string case_fold(std::string_view s);

// Same document and same case-folded head lemma.
bool match(const ExtractedEntity& predicted, const GoldEntity& gold);

using InducedSlot = std::pair<int, int>;  // (frame, local slot)

struct SlotMapping {
  int n = 1;
  std::map<std::string, std::vector<InducedSlot>> slots;  // gold slot -> chosen induced slots
};

// For each gold slot, greedily adds the induced slot that most raises the F1
// of the union, up to n slots, stopping when no candidate strictly helps.
SlotMapping fit_mapping(const std::vector<ExtractedEntity>& predictions,
                        const std::vector<GoldEntity>& gold, int n);

struct Prf {
  std::size_t predicted = 0;
  std::size_t correct_predictions = 0;
  std::size_t gold = 0;  // non-optional only
  std::size_t recalled = 0;

  double precision() const;
  double recall() const;
  double f1() const;
  Prf& operator+=(const Prf& o);
};

struct ScoreRow {
  std::string slot;
  Prf counts;
};

struct ScoreReport {
  std::vector<ScoreRow> rows;  // sorted by gold slot name
  Prf overall;                 // micro-average

  std::string to_text() const;
  nlohmann::json to_json() const;
};

ScoreReport score(const std::vector<ExtractedEntity>& predictions,
                  const std::vector<GoldEntity>& gold, const SlotMapping& mapping);

nlohmann::json mapping_to_json(const SlotMapping& mapping);

}  // namespace frameind

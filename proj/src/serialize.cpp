#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "frameind/error.hpp"
#include "frameind/params.hpp"

namespace frameind {

using nlohmann::json;

namespace {

json vocab_to_json(const Vocabulary& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(json::array({v.word(i), v.count(i)}));
  return out;
}

Vocabulary vocab_from_json(const json& j, const char* name) {
  if (!j.is_array() || j.empty())
    throw FormatError(std::string("vocabulary '") + name + "' is missing or empty");
  Vocabulary v;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_number_unsigned())
      throw FormatError(std::string("bad entry in vocabulary '") + name + "'");
    const auto word = e[0].get<std::string>();
    const auto count = e[1].get<std::uint64_t>();
    if (i == 0) {
      if (word != Vocabulary::kUnkToken)
        throw FormatError(std::string("vocabulary '") + name + "' must start with <unk>");
      v.set_unk_count(count);
      continue;
    }
    if (v.contains(word) || word == Vocabulary::kUnkToken)
      throw FormatError(std::string("duplicate word in vocabulary '") + name + "'");
    v.add(word, count);
  }
  return v;
}

json table_to_json(const RowTable& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    rows.push_back(json(std::vector<double>(row.begin(), row.end())));
  }
  return rows;
}

void table_from_json(const json& j, RowTable& t, std::string_view name) {
  const std::string where = "table '" + std::string(name) + "'";
  if (!j.is_array() || j.size() != t.rows()) throw FormatError(where + " has the wrong row count");
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto& row = j[r];
    if (!row.is_array() || row.size() != t.row_length(r))
      throw FormatError(where + " has a row of the wrong length");
    auto dst = t.row(r);
    for (std::size_t k = 0; k < dst.size(); ++k) {
      if (!row[k].is_number()) throw FormatError(where + " holds a non-numeric entry");
      const double x = row[k].get<double>();
      if (!std::isfinite(x) || x < 0.0) throw FormatError(where + " holds an invalid probability");
      dst[k] = x;
    }
  }
}

std::vector<int> int_list(const json& j, const char* name) {
  if (!j.is_array()) throw FormatError(std::string("structure field '") + name + "' missing");
  std::vector<int> out;
  for (const auto& x : j) {
    if (!x.is_number_integer()) throw FormatError(std::string("structure field '") + name + "' is not integral");
    out.push_back(x.get<int>());
  }
  return out;
}

}  // namespace

std::string serialize(const Model& model) {
  const auto& p = model.params;
  json alpha = json::object();
  json tables = json::object();
  for (int f = 0; f < kNumFamilies; ++f) {
    const auto fam = static_cast<Family>(f);
    alpha[std::string(family_name(fam))] = p.alpha[fam];
    tables[std::string(family_name(fam))] = table_to_json(p.tables[fam]);
  }
  json j = {
      {"format", std::string(kModelFormatName)},
      {"version", kModelFormatVersion},
      {"structure",
       {{"num_frames", p.structure.num_frames()},
        {"events_per_frame", p.structure.events_per_frame()},
        {"slots_per_frame", p.structure.slots_per_frame()}}},
      {"vocab",
       {{"event_heads", vocab_to_json(model.vocab.event_heads)},
        {"arg_heads", vocab_to_json(model.vocab.arg_heads)},
        {"caseframes", vocab_to_json(model.vocab.caseframes)}}},
      {"beta", p.beta},
      {"alpha", std::move(alpha)},
      {"tables", std::move(tables)},
      {"metadata", model.metadata},
  };
  return j.dump(1) + "\n";
}

Model deserialize(std::string_view bytes) {
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("corrupt model payload: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("format", "") != kModelFormatName)
      throw FormatError("not a model file");
    if (!j.contains("version") || !j["version"].is_number_integer())
      throw FormatError("model file has no version");
    if (j["version"].get<int>() != kModelFormatVersion)
      throw VersionError("unsupported model format version " +
                         std::to_string(j["version"].get<int>()) + " (expected " +
                         std::to_string(kModelFormatVersion) + ")");

    Model m;
    const auto& vj = j.at("vocab");
    m.vocab.event_heads = vocab_from_json(vj.at("event_heads"), "event_heads");
    m.vocab.arg_heads = vocab_from_json(vj.at("arg_heads"), "arg_heads");
    m.vocab.caseframes = vocab_from_json(vj.at("caseframes"), "caseframes");

    const auto& sj = j.at("structure");
    auto events = int_list(sj.at("events_per_frame"), "events_per_frame");
    auto slots = int_list(sj.at("slots_per_frame"), "slots_per_frame");
    if (static_cast<int>(events.size()) != sj.at("num_frames").get<int>() + 1)
      throw FormatError("structure sizes disagree with num_frames");
    try {
      m.params.structure = Structure(std::move(events), std::move(slots));
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("invalid structure: ") + e.what());
    }
    m.params.sizes = VocabSizes::of(m.vocab);
    m.params.beta = j.at("beta").get<double>();
    if (!(m.params.beta >= 0.0 && m.params.beta <= 1.0)) throw FormatError("beta outside [0,1]");
    m.params.tables = Tables::zeros(m.params.structure, m.params.sizes);
    for (int f = 0; f < kNumFamilies; ++f) {
      const auto fam = static_cast<Family>(f);
      const std::string name(family_name(fam));
      m.params.alpha[fam] = j.at("alpha").at(name).get<double>();
      table_from_json(j.at("tables").at(name), m.params.tables[fam], name);
    }
    m.metadata = j.value("metadata", json::object());
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt model payload: ") + e.what());
  }
}

void save_model(const Model& model, const std::string& path) {
  const std::string bytes = serialize(model);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp + "'");
    out << bytes;
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw DataError("failed writing '" + tmp + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw DataError("cannot move model into place at '" + path + "': " + ec.message());
  }
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace frameind

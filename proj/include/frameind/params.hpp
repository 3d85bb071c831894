#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "frameind/corpus.hpp"
#include "json.hpp"

namespace frameind {

// Frame layout. Content frames are 0..num_frames-1; the background frame is
// appended as frame num_frames. Events and slots get global ids in frame
// order, so the background frame's events and slots come last.
class Structure {
 public:
  Structure() = default;
  Structure(std::vector<int> events_per_frame, std::vector<int> slots_per_frame);

  // The initial layout: one event and two slots per content frame.
  static Structure initial(int num_frames, int num_bkg_events = 1, int num_bkg_slots = 2);

  int num_frames() const { return num_frames_; }
  int background_frame() const { return num_frames_; }
  int num_events(int frame) const { return events_[static_cast<std::size_t>(frame)]; }
  int num_slots(int frame) const { return slots_[static_cast<std::size_t>(frame)]; }
  int event_offset(int frame) const { return event_offset_[static_cast<std::size_t>(frame)]; }
  int slot_offset(int frame) const { return slot_offset_[static_cast<std::size_t>(frame)]; }
  int event_id(int frame, int local) const { return event_offset(frame) + local; }
  int slot_id(int frame, int local) const { return slot_offset(frame) + local; }

  // Events belonging to content frames; these ids double as CNT state ids.
  int content_events() const { return event_offset(num_frames_); }
  int total_events() const { return event_offset_.back(); }
  int total_slots() const { return slot_offset_.back(); }
  int frame_of_event(int event) const { return event_frame_[static_cast<std::size_t>(event)]; }
  int frame_of_slot(int slot) const { return slot_frame_[static_cast<std::size_t>(slot)]; }

  const std::vector<int>& events_per_frame() const { return events_; }
  const std::vector<int>& slots_per_frame() const { return slots_; }

  bool operator==(const Structure& o) const { return events_ == o.events_ && slots_ == o.slots_; }

 private:
  int num_frames_ = 0;
  std::vector<int> events_;
  std::vector<int> slots_;
  std::vector<int> event_offset_;
  std::vector<int> slot_offset_;
  std::vector<int> event_frame_;
  std::vector<int> slot_frame_;
};

// Variable-length rows packed into one buffer.
class RowTable {
 public:
  RowTable() : offsets_{0} {}
  explicit RowTable(const std::vector<std::size_t>& row_lengths, double fill = 0.0);

  std::size_t rows() const { return offsets_.size() - 1; }
  std::size_t row_length(std::size_t r) const { return offsets_[r + 1] - offsets_[r]; }
  std::size_t row_offset(std::size_t r) const { return offsets_[r]; }
  std::span<double> row(std::size_t r) { return {data_.data() + offsets_[r], row_length(r)}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + offsets_[r], row_length(r)};
  }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  std::vector<std::size_t> row_lengths() const;

  bool same_shape(const RowTable& o) const { return offsets_ == o.offsets_; }
  bool operator==(const RowTable& o) const = default;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<double> data_;
};

// The nine learned multinomial families.
enum class Family : int {
  kBackground = 0,  // P_BKG: one row {CNT, BKG}
  kFrameInit,       // P_F-INIT: one row over content frames
  kFrameTrans,      // P_F-TRAN: one row per content frame
  kEventInit,       // P_E-INIT: one row per frame (background included) over its events
  kEventTrans,      // P_E-TRAN: one row per content event over its frame's events
  kEventHead,       // P_E-HEAD: one row per event over event-head vocabulary
  kSlot,            // P_SLOT: one row per (event, arg type) over the frame's slots
  kArgHead,         // P_A-HEAD: one row per slot over argument-head vocabulary
  kArgDep,          // P_A-DEP: one row per slot over caseframe vocabulary
};
inline constexpr int kNumFamilies = 9;
std::string_view family_name(Family f);

inline constexpr int kCnt = 0;
inline constexpr int kBkg = 1;

struct VocabSizes {
  int event_heads = 1;
  int arg_heads = 1;
  int caseframes = 1;

  static VocabSizes of(const Vocabularies& v) {
    return {v.event_heads.size(), v.arg_heads.size(), v.caseframes.size()};
  }
  bool operator==(const VocabSizes&) const = default;
};

struct Tables {
  std::array<RowTable, kNumFamilies> family;

  static Tables zeros(const Structure& s, const VocabSizes& v);

  RowTable& operator[](Family f) { return family[static_cast<std::size_t>(f)]; }
  const RowTable& operator[](Family f) const { return family[static_cast<std::size_t>(f)]; }

  std::size_t slot_row(int event, ArgType a) const {
    return static_cast<std::size_t>(event) * kNumArgTypes + static_cast<std::size_t>(a);
  }
  bool operator==(const Tables&) const = default;
};

// Additive (uniform Dirichlet) smoothing constant per family.
struct Smoothing {
  std::array<double, kNumFamilies> alpha;

  Smoothing() { alpha.fill(0.1); }
  explicit Smoothing(double all) { alpha.fill(all); }
  double operator[](Family f) const { return alpha[static_cast<std::size_t>(f)]; }
  double& operator[](Family f) { return alpha[static_cast<std::size_t>(f)]; }
  Smoothing halved() const;
  bool operator==(const Smoothing&) const = default;
};

struct ModelParams {
  Structure structure;
  VocabSizes sizes;
  double beta = 0.5;
  Smoothing alpha;
  Tables tables;

  double p_bkg(int flag) const { return tables[Family::kBackground].row(0)[static_cast<std::size_t>(flag)]; }
  std::span<const double> event_head(int event) const {
    return tables[Family::kEventHead].row(static_cast<std::size_t>(event));
  }
  std::span<const double> slot_dist(int event, ArgType a) const {
    return tables[Family::kSlot].row(tables.slot_row(event, a));
  }
  std::span<const double> arg_head(int slot) const {
    return tables[Family::kArgHead].row(static_cast<std::size_t>(slot));
  }
  std::span<const double> arg_dep(int slot) const {
    return tables[Family::kArgDep].row(static_cast<std::size_t>(slot));
  }
  std::span<const double> event_init(int frame) const {
    return tables[Family::kEventInit].row(static_cast<std::size_t>(frame));
  }
  // Only defined for content events.
  std::span<const double> event_trans(int event) const {
    return tables[Family::kEventTrans].row(static_cast<std::size_t>(event));
  }
  std::span<const double> frame_trans(int frame) const {
    return tables[Family::kFrameTrans].row(static_cast<std::size_t>(frame));
  }
  std::span<const double> frame_init() const { return tables[Family::kFrameInit].row(0); }

  bool operator==(const ModelParams&) const = default;
};

// Expected counts laid out exactly like ModelParams::tables.
struct SufficientStats {
  Structure structure;
  Tables counts;
  double log_likelihood = 0.0;

  SufficientStats() = default;
  SufficientStats(const Structure& s, const VocabSizes& v)
      : structure(s), counts(Tables::zeros(s, v)) {}

  void add(Family f, std::size_t flat_index, double value) {
    counts[f].data()[flat_index] += value;
  }
  SufficientStats& operator+=(const SufficientStats& o);
  // Clears negative round-off left by subtract-old/add-new updates.
  void clamp_nonnegative();
};

// Uniform rows with multiplicative jitter (1 + jitter * u, u ~ U[-1, 1]),
// renormalized. Deterministic for a fixed seed.
ModelParams init_model(const Structure& structure, const VocabSizes& sizes, std::uint64_t seed,
                       double jitter, double beta = 0.5, Smoothing alpha = Smoothing());

// Smoothed maximum-a-posteriori re-estimate: p_k = (c_k + a) / (sum c + a K).
// Structure, beta and alpha are copied from `like`.
ModelParams m_step(const SufficientStats& stats, const ModelParams& like);
ModelParams m_step(const SufficientStats& stats, const ModelParams& like, const Smoothing& alpha);

// sum over every row and entry of alpha * log p; added to the data
// log-likelihood this is the objective MAP-EM climbs.
double log_prior(const ModelParams& params);

// Rows must sum to one and support constraints hold; returns the worst row error.
double max_normalization_error(const ModelParams& params);

// Renormalizes each row of the family; all-zero rows become uniform.
void normalize_rows(RowTable& table);

// A trained model plus its vocabularies and run metadata; what a model file holds.
struct Model {
  Vocabularies vocab;
  ModelParams params;
  nlohmann::json metadata = nlohmann::json::object();
};

inline constexpr int kModelFormatVersion = 1;
inline constexpr std::string_view kModelFormatName = "frameind-model";

std::string serialize(const Model& model);
Model deserialize(std::string_view bytes);

// Writes to a temporary file next to `path` and renames, so a failed write
// never leaves a partial model behind.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace frameind

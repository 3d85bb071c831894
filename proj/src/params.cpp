#include "frameind/params.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace frameind {

Structure::Structure(std::vector<int> events_per_frame, std::vector<int> slots_per_frame)
    : events_(std::move(events_per_frame)), slots_(std::move(slots_per_frame)) {
  if (events_.size() < 2 || events_.size() != slots_.size())
    throw std::invalid_argument("structure needs at least one content frame plus background");
  num_frames_ = static_cast<int>(events_.size()) - 1;
  event_offset_.assign(1, 0);
  slot_offset_.assign(1, 0);
  for (std::size_t f = 0; f < events_.size(); ++f) {
    if (events_[f] < 1 || slots_[f] < 1)
      throw std::invalid_argument("every frame needs at least one event and one slot");
    event_offset_.push_back(event_offset_.back() + events_[f]);
    slot_offset_.push_back(slot_offset_.back() + slots_[f]);
    event_frame_.insert(event_frame_.end(), static_cast<std::size_t>(events_[f]),
                        static_cast<int>(f));
    slot_frame_.insert(slot_frame_.end(), static_cast<std::size_t>(slots_[f]),
                       static_cast<int>(f));
  }
}

Structure Structure::initial(int num_frames, int num_bkg_events, int num_bkg_slots) {
  if (num_frames < 1) throw std::invalid_argument("num_frames must be positive");
  std::vector<int> events(static_cast<std::size_t>(num_frames), 1);
  std::vector<int> slots(static_cast<std::size_t>(num_frames), 2);
  events.push_back(num_bkg_events);
  slots.push_back(num_bkg_slots);
  return Structure(std::move(events), std::move(slots));
}

RowTable::RowTable(const std::vector<std::size_t>& row_lengths, double fill) {
  offsets_.reserve(row_lengths.size() + 1);
  offsets_.push_back(0);
  for (auto n : row_lengths) offsets_.push_back(offsets_.back() + n);
  data_.assign(offsets_.back(), fill);
}

std::vector<std::size_t> RowTable::row_lengths() const {
  std::vector<std::size_t> out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = row_length(r);
  return out;
}

std::string_view family_name(Family f) {
  switch (f) {
    case Family::kBackground: return "bkg";
    case Family::kFrameInit: return "frame_init";
    case Family::kFrameTrans: return "frame_trans";
    case Family::kEventInit: return "event_init";
    case Family::kEventTrans: return "event_trans";
    case Family::kEventHead: return "event_head";
    case Family::kSlot: return "slot";
    case Family::kArgHead: return "arg_head";
    case Family::kArgDep: return "arg_dep";
  }
  return "?";
}

Tables Tables::zeros(const Structure& s, const VocabSizes& v) {
  const auto F = static_cast<std::size_t>(s.num_frames());
  Tables t;
  t[Family::kBackground] = RowTable({2});
  t[Family::kFrameInit] = RowTable({F});
  t[Family::kFrameTrans] = RowTable(std::vector<std::size_t>(F, F));

  std::vector<std::size_t> e_init, e_trans, e_head, slot;
  for (int f = 0; f <= s.num_frames(); ++f)
    e_init.push_back(static_cast<std::size_t>(s.num_events(f)));
  for (int g = 0; g < s.total_events(); ++g) {
    const int f = s.frame_of_event(g);
    if (g < s.content_events()) e_trans.push_back(static_cast<std::size_t>(s.num_events(f)));
    e_head.push_back(static_cast<std::size_t>(v.event_heads));
    for (int a = 0; a < kNumArgTypes; ++a) slot.push_back(static_cast<std::size_t>(s.num_slots(f)));
  }
  t[Family::kEventInit] = RowTable(e_init);
  t[Family::kEventTrans] = RowTable(e_trans);
  t[Family::kEventHead] = RowTable(e_head);
  t[Family::kSlot] = RowTable(slot);
  const auto S = static_cast<std::size_t>(s.total_slots());
  t[Family::kArgHead] = RowTable(std::vector<std::size_t>(S, static_cast<std::size_t>(v.arg_heads)));
  t[Family::kArgDep] = RowTable(std::vector<std::size_t>(S, static_cast<std::size_t>(v.caseframes)));
  return t;
}

Smoothing Smoothing::halved() const {
  Smoothing s;
  for (std::size_t i = 0; i < alpha.size(); ++i) s.alpha[i] = alpha[i] / 2.0;
  return s;
}

SufficientStats& SufficientStats::operator+=(const SufficientStats& o) {
  for (int f = 0; f < kNumFamilies; ++f) {
    auto& dst = counts.family[static_cast<std::size_t>(f)].data();
    const auto& src = o.counts.family[static_cast<std::size_t>(f)].data();
    if (dst.size() != src.size()) throw std::invalid_argument("stats shape mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  log_likelihood += o.log_likelihood;
  return *this;
}

void SufficientStats::clamp_nonnegative() {
  for (auto& table : counts.family)
    for (auto& x : table.data())
      if (x < 0.0) x = 0.0;
}

void normalize_rows(RowTable& table) {
  for (std::size_t r = 0; r < table.rows(); ++r) {
    auto row = table.row(r);
    const double z = std::accumulate(row.begin(), row.end(), 0.0);
    if (z > 0.0) {
      for (auto& x : row) x /= z;
    } else {
      for (auto& x : row) x = 1.0 / static_cast<double>(row.size());
    }
  }
}

ModelParams init_model(const Structure& structure, const VocabSizes& sizes, std::uint64_t seed,
                       double jitter, double beta, Smoothing alpha) {
  ModelParams p;
  p.structure = structure;
  p.sizes = sizes;
  p.beta = beta;
  p.alpha = alpha;
  p.tables = Tables::zeros(structure, sizes);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& table : p.tables.family) {
    for (auto& x : table.data()) x = 1.0 + jitter * u(rng);
    normalize_rows(table);
  }
  return p;
}

ModelParams m_step(const SufficientStats& stats, const ModelParams& like) {
  return m_step(stats, like, like.alpha);
}

ModelParams m_step(const SufficientStats& stats, const ModelParams& like, const Smoothing& alpha) {
  ModelParams p;
  p.structure = like.structure;
  p.sizes = like.sizes;
  p.beta = like.beta;
  p.alpha = alpha;
  p.tables = stats.counts;
  for (int f = 0; f < kNumFamilies; ++f) {
    const double a = alpha.alpha[static_cast<std::size_t>(f)];
    if (!(a > 0.0)) throw std::invalid_argument("smoothing constants must be positive");
    auto& table = p.tables.family[static_cast<std::size_t>(f)];
    if (!table.same_shape(like.tables.family[static_cast<std::size_t>(f)]))
      throw std::invalid_argument("stats do not match the model structure");
    for (std::size_t r = 0; r < table.rows(); ++r) {
      auto row = table.row(r);
      const double n = std::accumulate(row.begin(), row.end(), 0.0);
      const double z = n + a * static_cast<double>(row.size());
      for (auto& x : row) x = (x + a) / z;
    }
  }
  return p;
}

double log_prior(const ModelParams& params) {
  double total = 0.0;
  for (int f = 0; f < kNumFamilies; ++f) {
    const double a = params.alpha.alpha[static_cast<std::size_t>(f)];
    double s = 0.0;
    for (double x : params.tables.family[static_cast<std::size_t>(f)].data()) s += std::log(x);
    total += a * s;
  }
  return total;
}

double max_normalization_error(const ModelParams& params) {
  double worst = 0.0;
  for (const auto& table : params.tables.family) {
    for (std::size_t r = 0; r < table.rows(); ++r) {
      auto row = table.row(r);
      double z = 0.0;
      for (double x : row) {
        if (!(x >= 0.0)) return std::numeric_limits<double>::infinity();
        z += x;
      }
      worst = std::max(worst, std::abs(z - 1.0));
    }
  }
  return worst;
}

}  // namespace frameind
